"""Monte Carlo BER estimation on synthetic data.

Trial ``i`` of a run with base seed ``s`` draws its instance from
``seeding.derive(s, i, attempt)``; ``attempt`` starts at 0 and increases only
when the instance has to be re-drawn (nothing erased in row 0, or, when
conditioning is requested, an all-zero latent first row).  Every method
evaluated on that trial sees the same instance and the same algorithm seed,
so comparisons between methods are paired.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.stats import binomtest

from paflab import seeding
from paflab.cluster import cluster_recommend, oracle_recommend
from paflab.paf import recommend
from paflab.seeding import Seed
from paflab.synthetic import ModelParams, ParameterError, sample
from paflab.theory import BerPrediction, PhaseLabel, predict_phase_ber

USER = 0
MAX_REDRAWS = 100


@dataclass(frozen=True)
class Method:
    """A recommender evaluated by the harness: ``paf`` (needs T), ``global``, ``oracle`` or ``cluster``."""

    kind: str
    T: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("paf", "global", "oracle", "cluster"):
            raise ValueError(f"unknown method {self.kind!r}")
        if self.kind == "paf" and (self.T is None or self.T < 1):
            raise ValueError("paf needs a positive T")

    @classmethod
    def parse(cls, text: str) -> "Method":
        kind, _, t = text.partition(":")
        return cls(kind, int(t) if t else None)

    def __str__(self) -> str:
        return f"{self.kind}:{self.T}" if self.T is not None else self.kind


@dataclass(frozen=True)
class TrialOutcome:
    error: Optional[int]  # None when no usable instance was drawn
    purity: float = math.nan
    votes: int = 0
    redraws: int = 0


@dataclass(frozen=True)
class TrialStats:
    trials: int
    errors: int
    ci_low: float
    ci_high: float
    discarded: int = 0
    redraws: int = 0
    mean_purity: float = math.nan
    mean_votes: float = math.nan

    @property
    def ber(self) -> float:
        return self.errors / self.trials if self.trials else math.nan

    @property
    def se(self) -> float:
        if not self.trials:
            return math.nan
        b = self.ber
        return math.sqrt(b * (1 - b) / self.trials)


def wilson_interval(errors: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    ci = binomtest(errors, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def summarize(outcomes: Sequence[TrialOutcome]) -> TrialStats:
    used = [o for o in outcomes if o.error is not None]
    errors = sum(o.error for o in used)
    lo, hi = wilson_interval(errors, len(used))
    return TrialStats(
        trials=len(used),
        errors=errors,
        ci_low=lo,
        ci_high=hi,
        discarded=len(outcomes) - len(used),
        redraws=sum(o.redraws for o in outcomes),
        mean_purity=float(np.mean([o.purity for o in used])) if used else math.nan,
        mean_votes=float(np.mean([o.votes for o in used])) if used else math.nan,
    )


def _draw(params: ModelParams, seed: Seed, condition_nonzero_row: bool):
    for attempt in range(MAX_REDRAWS + 1):
        s = seeding.derive(seed, attempt)
        latent, y = sample(params, s)
        if condition_nonzero_row and not latent.dense_row(USER).any():
            continue
        if len(y.erased_columns(USER)) == 0:
            continue
        return latent, y, s, attempt
    return None


def run_trial_methods(
    params: ModelParams,
    methods: Sequence[Method],
    seed: Seed,
    condition_nonzero_row: bool = False,
) -> list[TrialOutcome]:
    """One instance, every method; error bit is 1 iff the recommended item's latent value is 0."""
    drawn = _draw(params, seed, condition_nonzero_row)
    if drawn is None:
        return [TrialOutcome(None, redraws=MAX_REDRAWS + 1) for _ in methods]
    latent, y, s, attempt = drawn
    algo_seed = seeding.derive(s, seeding.STREAM_ALGORITHM)
    own_cluster = latent.row_partition[USER]
    out = []
    for m in methods:
        if m.kind == "paf":
            rec = recommend(y, USER, min(m.T, y.n_rows), seed=algo_seed)
        elif m.kind == "global":
            rec = recommend(y, USER, y.n_rows, seed=algo_seed)
        elif m.kind == "oracle":
            rec = oracle_recommend(latent, y, USER, seed=algo_seed)
        else:
            rec = cluster_recommend(y, params.k, USER, seed=algo_seed)
        purity = float(np.mean(latent.row_partition[rec.neighbors] == own_cluster))
        out.append(
            TrialOutcome(
                error=int(latent.value(USER, rec.item) == 0),
                purity=purity,
                votes=rec.vote_ones + rec.vote_zeros,
                redraws=attempt,
            )
        )
    return out


def run_trial(
    params: ModelParams, T: int, seed: Seed, condition_nonzero_row: bool = False
) -> TrialOutcome:
    return run_trial_methods(params, [Method("paf", T)], seed, condition_nonzero_row)[0]


def _chunk(args) -> list[list[TrialOutcome]]:
    params, methods, base_seed, indices, condition = args
    return [
        run_trial_methods(params, methods, seeding.derive(base_seed, i), condition)
        for i in indices
    ]


def run_trials(
    params: ModelParams,
    methods: Sequence[Method],
    trials: int,
    base_seed: int,
    workers: int = 1,
    condition_nonzero_row: bool = False,
) -> list[list[TrialOutcome]]:
    """Outcomes indexed [trial][method]; identical for any worker count."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    methods = list(methods)
    if workers <= 1:
        return _chunk((params, methods, base_seed, range(trials), condition_nonzero_row))
    bounds = np.linspace(0, trials, min(workers * 4, trials) + 1).astype(int)
    jobs = [
        (params, methods, base_seed, range(a, b), condition_nonzero_row)
        for a, b in zip(bounds[:-1], bounds[1:])
    ]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return [row for part in pool.map(_chunk, jobs) for row in part]


def estimate_many(
    params: ModelParams,
    methods: Sequence[Method],
    trials: int,
    base_seed: int,
    workers: int = 1,
    condition_nonzero_row: bool = False,
) -> list[TrialStats]:
    rows = run_trials(params, methods, trials, base_seed, workers, condition_nonzero_row)
    return [summarize([r[j] for r in rows]) for j in range(len(methods))]


def estimate_ber(
    params: ModelParams,
    T: int,
    trials: int,
    base_seed: int,
    workers: int = 1,
    condition_nonzero_row: bool = False,
) -> TrialStats:
    return estimate_many(
        params, [Method("paf", T)], trials, base_seed, workers, condition_nonzero_row
    )[0]


@dataclass(frozen=True)
class SweepRow:
    value: float
    stats: Optional[TrialStats]
    theory: Optional[BerPrediction] = None
    phase: Optional[PhaseLabel] = None
    error: Optional[str] = None


def sweep_alpha(
    base: ModelParams,
    alphas: Iterable[float],
    trials: int,
    base_seed: int,
    T: Optional[int] = None,
    workers: int = 1,
) -> list[SweepRow]:
    """BER of PAF(T) (default ``T = k``) at each alpha, with the phase-wise theory overlay.

    The overlay is the asymptotic value for PAF(k); it is attached whenever the
    phase is not a boundary, whatever T is.
    """
    out = []
    for a in alphas:
        try:
            params = replace(base, alpha=float(a))
        except ParameterError as exc:
            out.append(SweepRow(float(a), None, error=str(exc)))
            continue
        t = params.k if T is None else T
        stats = estimate_ber(params, t, trials, base_seed, workers)
        phase, theory = predict_phase_ber(params.n, params.k, params.alpha, params.p)
        out.append(SweepRow(float(a), stats, theory, phase))
    return out


def sweep_T(
    params: ModelParams,
    T_grid: Sequence[int],
    trials: int,
    base_seed: int,
    workers: int = 1,
) -> tuple[list[SweepRow], Optional[int]]:
    """BER of PAF(T) for each T on shared instances; returns rows and the argmin T."""
    grid = [int(t) for t in T_grid]
    if not grid:
        return [], None
    bad = [t for t in grid if not 1 <= t <= params.n_rows]
    if bad:
        raise ParameterError(f"T must lie in [1, {params.n_rows}], got {bad}")
    stats = estimate_many(params, [Method("paf", t) for t in grid], trials, base_seed, workers)
    phase, theory = predict_phase_ber(params.n, params.k, params.alpha, params.p)
    rows = []
    for t, st in zip(grid, stats):
        rows.append(SweepRow(float(t), st, theory, phase))
    best = min(zip(grid, stats), key=lambda ts: (ts[1].ber, ts[0]))[0]
    return rows, best


CSV_HEADER = ["swept_value", "trials", "errors", "ber", "ci_low", "ci_high",
              "theory_low", "theory_high", "phase"]


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        st = r.stats
        w.writerow([
            _fmt(r.value),
            _fmt(st.trials if st else None),
            _fmt(st.errors if st else None),
            _fmt(st.ber if st else None),
            _fmt(st.ci_low if st else None),
            _fmt(st.ci_high if st else None),
            _fmt(r.theory.lower if r.theory else None),
            _fmt(r.theory.upper if r.theory else None),
            r.phase.value if r.phase else (f"error: {r.error}" if r.error else ""),
        ])
    return buf.getvalue()


STATS_HEADER = ["method", "trials", "errors", "ber", "ci_low", "ci_high",
                "discarded", "redraws", "mean_purity", "mean_votes"]


def stats_csv(labels: Sequence[str], stats: Sequence[TrialStats]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STATS_HEADER)
    for label, st in zip(labels, stats):
        w.writerow([label] + [_fmt(v) for v in (
            st.trials, st.errors, st.ber, st.ci_low, st.ci_high,
            st.discarded, st.redraws, st.mean_purity, st.mean_votes)])
    return buf.getvalue()
