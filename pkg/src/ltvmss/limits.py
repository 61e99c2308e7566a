"""Fundamental limits on mean-square stabilization over a multiplicative channel.

With ``G`` the open-loop growth term, the mean-square condition reads

    sigma2 * (G - 1) / mu**2 < 1

where ``G = (prod of positive multipliers)**(2/M)`` when ``M < N`` (necessary
only) and ``G = (largest multiplier)**2`` when ``M = N`` (necessary and
sufficient, invertible ``B``).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import ThresholdError
from .spectrum import ZERO_THRESHOLD, SpectrumResult

__all__ = [
    "LimitVerdict",
    "growth_term",
    "necessary_condition",
    "critical_variance",
    "critical_erasure_probability",
]

NECESSARY_ONLY = "necessary-only"
NECESSARY_AND_SUFFICIENT = "necessary-and-sufficient"
_EQUALITY_BAND = 1e-12


@dataclass(frozen=True)
class LimitVerdict:
    lhs: float
    satisfied: bool
    margin: float
    regime: str
    mu: float
    sigma2: float
    M: int
    N1: int
    growth: float
    at_boundary: bool = False
    open_loop_stable: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def _regime(spec: SpectrumResult, M: int) -> str:
    if not 1 <= M <= spec.n:
        raise ValueError(f"input count M must satisfy 1 <= M <= N={spec.n}, got {M}")
    return NECESSARY_AND_SUFFICIENT if M == spec.n else NECESSARY_ONLY


def growth_term(spec: SpectrumResult, M: int) -> float:
    """The open-loop growth ``G`` entering the condition for ``M`` inputs."""
    if _regime(spec, M) == NECESSARY_AND_SUFFICIENT:
        return float(np.exp(2.0 * spec.exponents[0]))
    pos = spec.exponents[spec.exponents > ZERO_THRESHOLD]
    return float(np.exp(2.0 * pos.sum() / M))


def necessary_condition(spec: SpectrumResult, mu: float, sigma2: float, M: int) -> LimitVerdict:
    """Evaluate ``sigma2 * (G - 1) / mu**2 < 1``.

    Equality counts as violated (the condition is strict); values within
    1e-12 of one are flagged through ``at_boundary``.
    """
    if mu == 0:
        raise ThresholdError("mu: the threshold is undefined for zero mean connectivity")
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be nonnegative, got {sigma2}")
    regime = _regime(spec, M)
    G = growth_term(spec, M)
    lhs = sigma2 * (G - 1.0) / mu**2
    return LimitVerdict(
        lhs=float(lhs),
        satisfied=bool(lhs < 1.0),
        margin=float(1.0 - lhs),
        regime=regime,
        mu=float(mu),
        sigma2=float(sigma2),
        M=int(M),
        N1=spec.N1,
        growth=G,
        at_boundary=bool(abs(lhs - 1.0) <= _EQUALITY_BAND),
        open_loop_stable=spec.N1 == 0,
    )


def critical_variance(spec: SpectrumResult, mu: float, M: int) -> float:
    """Critical channel standard deviation ``sigma* = (mu**2 / (G - 1))**0.5``.

    Returns ``inf`` when ``G <= 1`` (no open-loop growth to compensate).
    """
    if mu == 0:
        raise ThresholdError("mu: the threshold is undefined for zero mean connectivity")
    G = growth_term(spec, M)
    if G <= 1.0:
        return math.inf
    return math.sqrt(mu**2 / (G - 1.0))


def critical_erasure_probability(spec: SpectrumResult, M: int) -> float:
    """Smallest admissible non-erasure probability ``p* = 1 - 1/G`` (0 if ``G <= 1``)."""
    G = growth_term(spec, M)
    if G <= 1.0:
        return 0.0
    return float(-np.expm1(-np.log(G)))
