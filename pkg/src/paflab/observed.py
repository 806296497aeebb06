"""Sparse ternary rating matrix over {0, 1, erased}."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from os import PathLike
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

ERASED = -1


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ObservedMatrix:
    """Row-compressed store of the unerased entries.

    Row ``i`` occupies ``indices[indptr[i]:indptr[i+1]]`` (sorted, unique
    column indices) with matching bits in ``values``.  Anything not stored is
    erased.  Instances are immutable; use the ``from_*`` constructors.
    """

    n_rows: int
    n_cols: int
    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray

    @classmethod
    def from_entries(cls, n_rows, n_cols, rows, cols, bits) -> "ObservedMatrix":
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        bits = np.asarray(bits).ravel()
        if not (len(rows) == len(cols) == len(bits)):
            raise ValueError("rows, cols and bits must have equal length")
        if n_rows < 0 or n_cols < 0:
            raise ValueError("dimensions must be non-negative")
        if len(rows):
            if rows.min() < 0 or rows.max() >= n_rows:
                raise IndexError("row index out of range")
            if cols.min() < 0 or cols.max() >= n_cols:
                raise IndexError("column index out of range")
            if not np.isin(bits, (0, 1)).all():
                raise ValueError("stored values must be 0 or 1")
        order = np.lexsort((cols, rows))
        rows, cols, bits = rows[order], cols[order], bits[order]
        if len(rows) > 1:
            dup = (rows[1:] == rows[:-1]) & (cols[1:] == cols[:-1])
            if dup.any():
                k = int(np.flatnonzero(dup)[0])
                raise ValueError(f"duplicate entry at ({rows[k]}, {cols[k]})")
        return cls._from_sorted(n_rows, n_cols, rows, cols, bits)

    @classmethod
    def _from_sorted(cls, n_rows, n_cols, rows, cols, bits) -> "ObservedMatrix":
        # Caller guarantees (rows, cols) sorted, unique, in range and bits in {0, 1}.
        indptr = np.zeros(n_rows + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n_rows), out=indptr[1:])
        return cls._from_csr(n_rows, n_cols, indptr, cols, bits)

    @classmethod
    def _from_csr(cls, n_rows, n_cols, indptr, cols, bits) -> "ObservedMatrix":
        return cls(
            int(n_rows),
            int(n_cols),
            _readonly(np.ascontiguousarray(indptr, dtype=np.int64)),
            _readonly(np.ascontiguousarray(cols, dtype=np.int64)),
            _readonly(np.ascontiguousarray(bits, dtype=np.int8)),
        )

    @classmethod
    def from_dense(cls, dense) -> "ObservedMatrix":
        """Build from a 2-D array with 0/1 for observed bits and -1 (or None) for erasures."""
        a = np.array(dense, dtype=object)
        if a.ndim != 2:
            raise ValueError("dense input must be 2-D")
        a = np.where(a == None, ERASED, a).astype(np.int64)  # noqa: E711
        rows, cols = np.nonzero(a != ERASED)
        return cls.from_entries(a.shape[0], a.shape[1], rows, cols, a[rows, cols])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Sorted unerased columns of row ``i`` and their bits."""
        self._check_row(i)
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.values[lo:hi]

    def get(self, i: int, j: int) -> Optional[int]:
        """Return 0, 1, or ``None`` when the entry is erased."""
        if not 0 <= j < self.n_cols:
            raise IndexError(f"column {j} out of range")
        cols, bits = self.row(i)
        pos = np.searchsorted(cols, j)
        if pos < len(cols) and cols[pos] == j:
            return int(bits[pos])
        return None

    def erased_columns(self, i: int) -> np.ndarray:
        cols, _ = self.row(i)
        mask = np.ones(self.n_cols, dtype=bool)
        mask[cols] = False
        return np.flatnonzero(mask)

    def row_ids(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_rows), np.diff(self.indptr))

    def to_dense(self) -> np.ndarray:
        out = np.full((self.n_rows, self.n_cols), ERASED, dtype=np.int8)
        out[self.row_ids(), self.indices] = self.values
        return out

    def transpose(self) -> "ObservedMatrix":
        return ObservedMatrix.from_entries(
            self.n_cols, self.n_rows, self.indices, self.row_ids(), self.values
        )

    @cached_property
    def ones(self) -> sp.csr_matrix:
        """0/1 CSR indicator of observed ones."""
        return self._indicator(1)

    @cached_property
    def zeros(self) -> sp.csr_matrix:
        """0/1 CSR indicator of observed zeros."""
        return self._indicator(0)

    def _indicator(self, bit: int) -> sp.csr_matrix:
        keep = self.values == bit
        kept_before = np.concatenate(([0], np.cumsum(keep)))
        indptr = kept_before[self.indptr]
        data = np.ones(int(kept_before[-1]), dtype=np.int32)
        return sp.csr_matrix((data, self.indices[keep], indptr), shape=self.shape)

    def row_sums(self, per_entry: np.ndarray) -> np.ndarray:
        """Sum a per-stored-entry array within each row."""
        padded = np.zeros(len(per_entry) + 1, dtype=np.int64)
        padded[:-1] = per_entry
        sums = np.add.reduceat(padded, self.indptr[:-1])
        # reduceat yields the first element, not 0, for empty segments.
        sums[self.indptr[1:] == self.indptr[:-1]] = 0
        return sums

    def entries_of(self, rows) -> tuple[np.ndarray, np.ndarray]:
        """Concatenated (columns, bits) of the stored entries in ``rows``."""
        rows = np.asarray(rows, dtype=np.int64)
        if len(rows) * 4 > self.n_rows:
            mask = np.zeros(self.n_rows, dtype=bool)
            mask[rows] = True
            keep = np.repeat(mask, np.diff(self.indptr))
            return self.indices[keep], self.values[keep]
        spans = [slice(self.indptr[r], self.indptr[r + 1]) for r in rows]
        return (
            np.concatenate([self.indices[s] for s in spans]),
            np.concatenate([self.values[s] for s in spans]),
        )

    def _check_row(self, i: int) -> None:
        if not 0 <= i < self.n_rows:
            raise IndexError(f"row {i} out of range")

    def __eq__(self, other) -> bool:
        if not isinstance(other, ObservedMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"ObservedMatrix({self.n_rows}x{self.n_cols}, nnz={self.nnz})"

    # Text format: header "n_rows n_cols", then one "row col bit" line per stored entry.

    def to_text(self) -> str:
        lines = [f"{self.n_rows} {self.n_cols}"]
        lines.extend(
            f"{r} {c} {b}" for r, c, b in zip(self.row_ids(), self.indices, self.values)
        )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ObservedMatrix":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty matrix file")
        try:
            n_rows, n_cols = (int(x) for x in lines[0].split())
        except ValueError as exc:
            raise ValueError(f"line 1: bad header {lines[0]!r}") from exc
        body = np.zeros((len(lines) - 1, 3), dtype=np.int64)
        for lineno, ln in enumerate(lines[1:], start=2):
            parts = ln.split()
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected 'row col bit', got {ln!r}")
            try:
                body[lineno - 2] = [int(x) for x in parts]
            except ValueError as exc:
                raise ValueError(f"line {lineno}: non-integer field in {ln!r}") from exc
        return cls.from_entries(n_rows, n_cols, body[:, 0], body[:, 1], body[:, 2])

    def save(self, path: Union[str, PathLike]) -> None:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path: Union[str, PathLike]) -> "ObservedMatrix":
        with open(path, encoding="ascii") as fh:
            return cls.from_text(fh.read())
