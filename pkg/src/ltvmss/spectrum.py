"""Lyapunov spectra of the uncontrolled cocycle ``x(t+1) = A(t) x(t)``."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .model import PERIODIC, SystemModel

__all__ = [
    "SpectrumResult",
    "ZERO_THRESHOLD",
    "default_horizon",
    "lyapunov_spectrum",
    "monodromy_spectrum",
    "positive_exponent_product",
    "spectrum_from_exponents",
]

log = logging.getLogger(__name__)

ZERO_THRESHOLD = 1e-9
# |R_ii| at or below this counts as an exact rank collapse
_UNDERFLOW_FLOOR = np.finfo(float).tiny


@dataclass(frozen=True)
class SpectrumResult:
    """Ordered Lyapunov exponents (natural log, per step) and diagnostics.

    ``transient`` steps at the start of the horizon only align the frame;
    exponents are time averages over ``[transient, horizon)``.
    """

    exponents: np.ndarray
    multipliers: np.ndarray
    N1: int
    N2: int
    horizon: int
    transient: int
    convergence: np.ndarray
    converged: bool
    singular: bool = False
    zero_tie: bool = False

    @property
    def n(self) -> int:
        return len(self.exponents)

    def to_dict(self) -> dict:
        return {
            "exponents": [float(x) for x in self.exponents],
            "multipliers": [float(x) for x in self.multipliers],
            "N1": self.N1,
            "N2": self.N2,
            "converged": self.converged,
            "horizon": self.horizon,
            "transient": self.transient,
            "convergence": [float(x) for x in self.convergence],
            "singular": self.singular,
            "zero_tie": self.zero_tie,
        }


def spectrum_from_exponents(exponents, horizon=0, transient=0, convergence=None,
                            converged=True, singular=False) -> SpectrumResult:
    """Wrap known exponents (any order) into a sorted :class:`SpectrumResult`."""
    ex = np.sort(np.asarray(exponents, dtype=float))[::-1].copy()
    n1 = int(np.sum(ex > ZERO_THRESHOLD))
    tie = bool(np.any(np.abs(ex) <= ZERO_THRESHOLD))
    if convergence is None:
        convergence = np.zeros_like(ex)
    with np.errstate(over="ignore"):
        mult = np.exp(ex)
    return SpectrumResult(ex, mult, n1, len(ex) - n1, int(horizon), int(transient),
                          np.asarray(convergence, dtype=float), bool(converged),
                          bool(singular), tie)


def default_horizon(sys: SystemModel) -> int:
    """10 000 steps, or the smallest period multiple covering that and >= 300 periods."""
    if sys.kind == PERIODIC:
        return sys.period * max(300, math.ceil(10_000 / sys.period))
    return 10_000


def lyapunov_spectrum(sys: SystemModel, horizon: int | None = None, tol: float = 1e-3,
                      transient: int | None = None) -> SpectrumResult:
    """Lyapunov exponents by QR re-orthonormalization.

    An orthonormal frame is pushed through ``A(t)`` and re-orthonormalized at
    every step; the logs of ``|R_ii|`` accumulated after the transient, divided
    by the number of accumulated steps, are the exponents.

    Parameters
    ----------
    sys : SystemModel
    horizon : int, optional
        Total number of steps including the transient. Defaults to
        :func:`default_horizon`. Periodic systems are rounded up to a whole
        number of periods.
    tol : float
        Convergence tolerance on the change between the estimates at 90% and
        100% of the accumulation window, relative to ``max(|exponent|, 1)``.
    transient : int, optional
        Leading steps used only to align the frame. Defaults to 10% of the
        horizon (a whole number of periods for periodic systems).

    Returns
    -------
    SpectrumResult
        ``converged`` is False when the diagnostic exceeds ``tol``; exponents
        of collapsed directions are ``-inf`` with ``singular`` set.
    """
    n = sys.n_states
    if horizon is None:
        horizon = default_horizon(sys)
    horizon = int(horizon)
    p = sys.period if sys.kind == PERIODIC else 1
    if horizon % p:
        horizon += p - horizon % p
    if transient is None:
        transient = (horizon // 10) // p * p
    transient = int(transient)
    steps = horizon - transient
    if steps < max(n, 1) or transient < 0:
        raise ValueError(f"need horizon - transient >= N={n}, got horizon={horizon}, transient={transient}")
    check_at = transient + max(1, int(round(0.9 * steps)))
    if p > 1:
        check_at = transient + max(p, (check_at - transient) // p * p)

    Q = np.eye(n)
    acc = np.zeros(n)
    early = None
    singular = np.zeros(n, dtype=bool)
    for t in range(horizon):
        if t == check_at:
            early = acc / (t - transient)
        Q, R = np.linalg.qr(sys.A(t) @ Q)
        d = np.abs(np.diagonal(R))
        if t >= transient:
            dead = d <= _UNDERFLOW_FLOOR
            if dead.any():
                singular |= dead
                d = np.where(dead, 1.0, d)
            acc += np.log(d)
    est = acc / steps
    if early is None:
        early = est
    est = np.where(singular, -np.inf, est)
    early = np.where(singular, -np.inf, early)

    order = np.argsort(-est, kind="stable")
    ex = est[order]
    with np.errstate(invalid="ignore"):
        conv = np.abs(ex - early[order]) / np.maximum(np.abs(ex), 1.0)
    conv = np.where(np.isfinite(ex), conv, 0.0)
    converged = bool(np.all(conv <= tol))
    if singular.any():
        log.warning("singular A(t) encountered; %d exponent(s) reported as -inf", int(singular.sum()))
    if not converged:
        log.warning("Lyapunov spectrum not converged (max diagnostic %.3g > %.3g)", conv.max(), tol)
    res = spectrum_from_exponents(ex, horizon, transient, conv, converged, bool(singular.any()))
    if res.zero_tie:
        log.warning("an exponent lies within %.0e of zero; positive/negative split is ambiguous",
                    ZERO_THRESHOLD)
    return res


def monodromy_spectrum(sys: SystemModel, period: int | None = None) -> np.ndarray:
    """Exponents ``log|eig(A(p-1)...A(0))| / p`` of a periodic system, nonincreasing."""
    if period is None:
        if sys.kind != PERIODIC:
            raise ValueError("monodromy_spectrum needs a periodic system or an explicit period")
        period = sys.period
    M = np.eye(sys.n_states)
    for t in range(period):
        M = sys.A(t) @ M
    mags = np.abs(np.linalg.eigvals(M))
    with np.errstate(divide="ignore"):
        ex = np.log(mags) / period
    return np.sort(ex)[::-1]


def positive_exponent_product(spec: SpectrumResult) -> float:
    """``exp`` of the sum of exponents above the zero threshold (1 if none)."""
    pos = spec.exponents[spec.exponents > ZERO_THRESHOLD]
    return float(np.exp(pos.sum())) if pos.size else 1.0
