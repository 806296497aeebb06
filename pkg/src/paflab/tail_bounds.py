"""Exact binomial/hypergeometric tails and the concentration bounds checked against them.

All combinatorics run in log space so populations up to ~10^6 are fine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, gammaln, logsumexp, xlog1py, xlogy


class DomainError(ValueError):
    """A bound was requested outside the range where it holds."""


@dataclass(frozen=True)
class HypergeomParams:
    """Draw ``n`` items without replacement from ``N`` of which ``m`` are successes."""

    N: int
    m: int
    n: int

    def __post_init__(self):
        if not (0 <= self.m <= self.N and 0 <= self.n <= self.N):
            raise ValueError(f"need 0 <= m, n <= N, got {self}")

    @property
    def p(self) -> float:
        return self.m / self.N if self.N else 0.0

    @property
    def mean(self) -> float:
        return self.n * self.p

    @property
    def support(self) -> tuple[int, int]:
        return max(0, self.n - (self.N - self.m)), min(self.n, self.m)


def _log_choose(a, b):
    return gammaln(a + 1) - gammaln(b + 1) - gammaln(a - b + 1)


def binom_logpmf(n: int, p: float, j) -> np.ndarray:
    j = np.asarray(j, dtype=float)
    return _log_choose(n, j) + xlogy(j, p) + xlog1py(n - j, -p)


def binom_tail_exact(n: int, p: float, t: float) -> float:
    """``Pr[X >= t]`` for ``X ~ B(n, p)`` by summing the pmf."""
    lo = math.ceil(t)
    if lo <= 0:
        return 1.0
    if lo > n:
        return 0.0
    terms = binom_logpmf(n, p, np.arange(lo, n + 1))
    return float(min(1.0, math.exp(logsumexp(terms))))


def binom_tail_low_mean_bound(n: int, p: float, t: float) -> float:
    """``2**-t`` bound on ``Pr[X > t]``; valid only for ``t > 2e * n * p``."""
    if not t > 2 * math.e * n * p:
        raise DomainError(f"t={t} must exceed 2e*E[X]={2 * math.e * n * p:.6g}")
    return 2.0**-t


def hypergeom_pmf(hp: HypergeomParams, t) -> np.ndarray | float:
    t_arr = np.asarray(t)
    lo, hi = hp.support
    tf = t_arr.astype(float)
    inside = (tf >= lo) & (tf <= hi) & (tf == np.floor(tf))
    safe = np.where(inside, tf, lo)
    logp = (
        _log_choose(hp.m, safe)
        + _log_choose(hp.N - hp.m, hp.n - safe)
        - _log_choose(hp.N, hp.n)
    )
    out = np.where(inside, np.exp(logp), 0.0)
    return float(out) if out.ndim == 0 else out


def _hypergeom_mass(hp: HypergeomParams, a: int, b: int) -> float:
    # Pr[a <= X <= b] for a, b inside the support
    j = np.arange(a, b + 1, dtype=float)
    logp = _log_choose(hp.m, j) + _log_choose(hp.N - hp.m, hp.n - j) - _log_choose(hp.N, hp.n)
    return float(min(1.0, math.exp(logsumexp(logp))))


def hypergeom_tail_exact(hp: HypergeomParams, t: float) -> float:
    """``Pr[X >= t]``."""
    lo, hi = hp.support
    start = max(math.ceil(t), lo)
    if start > hi:
        return 0.0
    if start <= lo:
        return 1.0
    return _hypergeom_mass(hp, start, hi)


def hypergeom_lower_tail_exact(hp: HypergeomParams, t: float) -> float:
    """``Pr[X <= t]``, summed directly so tiny tails keep their precision."""
    lo, hi = hp.support
    stop = min(math.floor(t), hi)
    if stop < lo:
        return 0.0
    if stop >= hi:
        return 1.0
    return _hypergeom_mass(hp, lo, stop)


def hypergeom_tail_low_mean_bound(hp: HypergeomParams, t: float) -> float:
    """``2**-t`` bound on ``Pr[X > t]`` for ``t > 2e * E[X]``."""
    if not t > 2 * math.e * hp.mean:
        raise DomainError(f"t={t} must exceed 2e*E[X]={2 * math.e * hp.mean:.6g}")
    return 2.0**-t


def _upper_gate(hp: HypergeomParams, t: float) -> float:
    p = hp.p
    if t < 0 or t >= 1 - p:
        raise DomainError(f"need 0 <= t < 1 - p = {1 - p:.6g}, got t={t}")
    return p


def _lower_gate(hp: HypergeomParams, t: float) -> float:
    p = hp.p
    if t < 0 or t >= p:
        raise DomainError(f"need 0 <= t < p = {p:.6g}, got t={t}")
    return p


def _capped_power(base: float, n: int) -> float:
    # min(1, base**n) without overflow for large n
    log_val = n * math.log(base)
    return 1.0 if log_val >= 0 else math.exp(log_val)


def chvatal_upper(hp: HypergeomParams, t: float) -> float:
    """``((p/(p+t)) * ((1-p)/(1-p-t)))**n`` as a bound on ``Pr[X >= (p+t)n]``, capped at 1.

    This is the product *without* the ``p+t`` and ``1-p-t`` exponents; it is
    not a valid bound in general (see :func:`chvatal_upper_strict`).
    """
    p = _upper_gate(hp, t)
    if t == 0:
        return 1.0
    base = (p / (p + t)) * ((1 - p) / (1 - p - t))
    return _capped_power(base, hp.n)


def chvatal_upper_strict(hp: HypergeomParams, t: float) -> float:
    """Chvátal's bound ``exp(-n * KL(p+t || p))`` on ``Pr[X >= (p+t)n]``."""
    p = _upper_gate(hp, t)
    if t == 0:
        return 1.0
    q = p + t
    log_base = -xlogy(q, q / p) - xlogy(1 - q, (1 - q) / (1 - p))
    return float(min(1.0, math.exp(hp.n * log_base)))


def chvatal_lower(hp: HypergeomParams, t: float) -> float:
    """Mirror of :func:`chvatal_upper` for ``Pr[X <= (p-t)n]``."""
    p = _lower_gate(hp, t)
    if t == 0:
        return 1.0
    base = (p / (p - t)) * ((1 - p) / (1 - p + t))
    return _capped_power(base, hp.n)


def chvatal_lower_strict(hp: HypergeomParams, t: float) -> float:
    """``exp(-n * KL(p-t || p))`` bound on ``Pr[X <= (p-t)n]``."""
    p = _lower_gate(hp, t)
    if t == 0:
        return 1.0
    q = p - t
    log_base = -xlogy(q, q / p) - xlogy(1 - q, (1 - q) / (1 - p))
    return float(min(1.0, math.exp(hp.n * log_base)))


def simple_tail(hp: HypergeomParams, delta: float) -> float:
    """Bound ``2 exp(-E[X] delta**2 / 3)`` on ``Pr[|X - E[X]| >= delta E[X]]``, capped at 1."""
    if not 0 <= delta <= 1:
        raise DomainError(f"delta must lie in [0, 1], got {delta}")
    return float(min(1.0, 2.0 * math.exp(-hp.mean * delta**2 / 3.0)))


def simple_tail_exact(hp: HypergeomParams, delta: float) -> float:
    """Exact ``Pr[X >= (1+delta)E[X] or X <= (1-delta)E[X]]``."""
    mu = hp.mean
    hi = hypergeom_tail_exact(hp, (1 + delta) * mu)
    lo = hypergeom_lower_tail_exact(hp, (1 - delta) * mu)
    if delta == 0:
        return 1.0
    return min(1.0, hi + lo)


def moderate_deviation_q(t: float) -> float:
    """Upper tail of the standard normal, ``Q(t) = erfc(t / sqrt 2) / 2``."""
    if t < 0:
        raise DomainError("t must be non-negative")
    return float(0.5 * erfc(t / math.sqrt(2.0)))


def moderate_deviation_ratio(n: int, p: float, t: float) -> float:
    """``Pr[X > np + t sqrt(np(1-p))] / Q(t)`` for ``X ~ B(n, p)``, evaluated exactly."""
    threshold = n * p + t * math.sqrt(n * p * (1 - p))
    return binom_tail_exact(n, p, math.floor(threshold) + 1) / moderate_deviation_q(t)
