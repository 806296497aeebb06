"""Asymptotic BER of PAF and of the cluster oracle, plus the phase map.

Finite-n correction sequences (the ``o(1)`` terms in the exponents) are taken
to be zero, so ``gamma = alpha - ln k / ln n`` exactly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

# Relative tolerance for deciding that 1/gamma is an integer.
INTEGER_RTOL = 1e-9


class PhaseLabel(str, enum.Enum):
    PHASE_I = "PhaseI"
    PHASE_II = "PhaseII"
    PHASE_III = "PhaseIII"
    BOUNDARY = "Boundary"


@dataclass(frozen=True)
class BerPrediction:
    lower: float
    upper: float

    def __post_init__(self):
        if not 0.0 <= self.lower <= self.upper <= 0.5:
            raise ValueError(f"invalid BER interval [{self.lower}, {self.upper}]")

    @property
    def exact(self) -> bool:
        return self.lower == self.upper

    @classmethod
    def point(cls, value: float) -> "BerPrediction":
        return cls(value, value)


def gamma_of(n: int, k: int, alpha: float) -> float:
    if n < 2 or not 1 <= k <= n:
        raise ValueError(f"need n >= 2 and 1 <= k <= n, got n={n}, k={k}")
    return alpha - math.log(k) / math.log(n)


def phase_classify(n: int, k: int, alpha: float, tol: float = 1e-9) -> PhaseLabel:
    if alpha > 0.5 + tol:
        return PhaseLabel.PHASE_III
    if alpha < 0.5 - tol:
        if gamma_of(n, k, alpha) <= tol:
            return PhaseLabel.PHASE_I
        return PhaseLabel.PHASE_II
    return PhaseLabel.BOUNDARY


def vote_error(p: float, votes: float) -> float:
    """``p**x / (p**x + (1-p)**x)``: chance that ``x`` agreeing noisy votes are all wrong."""
    if votes == 0:
        return 0.5
    a, b = p**votes, (1.0 - p) ** votes
    return a / (a + b)


def _integer_part(x: float) -> tuple[int, bool]:
    # (floor(x), whether x is an integer) with a relative tolerance at integers.
    nearest = round(x)
    if abs(x - nearest) <= INTEGER_RTOL * max(1.0, abs(x)):
        return int(nearest), True
    return math.floor(x), False


def _check(p: float, gamma: float) -> float:
    if not 0.0 <= p < 0.5:
        raise ValueError(f"p must lie in [0, 1/2), got {p}")
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    return 1.0 / gamma


def paf_limit_ber(p: float, gamma: float) -> BerPrediction:
    """Limiting BER of PAF(k) when ``k = n**(alpha - gamma)``.

    For integer ``1/gamma`` only an interval is known.
    """
    m, integral = _integer_part(_check(p, gamma))
    if integral:
        return BerPrediction(vote_error(p, m), vote_error(p, m - 1))
    return BerPrediction.point(vote_error(p, m))


def optimal_limit_ber(p: float, gamma: float) -> BerPrediction:
    """Limiting BER bounds of the clustering recommender when ``k**2 = n**(alpha - gamma)``.

    Lower bound uses ``floor(1/gamma)`` votes, upper bound ``ceil(1/gamma - 1)``.
    """
    x = _check(p, gamma)
    lo, integral = _integer_part(x)
    hi_votes = lo - 1 if integral else lo
    return BerPrediction(vote_error(p, lo), vote_error(p, hi_votes))


def predict_phase_ber(n: int, k: int, alpha: float, p: float, tol: float = 1e-9
                      ) -> tuple[PhaseLabel, Optional[BerPrediction]]:
    """Phase label and the matching asymptotic BER for PAF(k); None on a boundary."""
    phase = phase_classify(n, k, alpha, tol)
    if phase is PhaseLabel.PHASE_I:
        return phase, BerPrediction.point(0.0)
    if phase is PhaseLabel.PHASE_III:
        return phase, BerPrediction.point(0.5)
    if phase is PhaseLabel.PHASE_II:
        return phase, paf_limit_ber(p, min(gamma_of(n, k, alpha), 1.0))
    return phase, None
