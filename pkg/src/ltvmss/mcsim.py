"""Monte Carlo ensembles of the stochastic closed loop and an exact moment oracle."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .channel import NOISE_STREAM, ChannelModel, draw, stream_generator
from .exceptions import FitError
from .model import SystemModel
from .synthesis import GainSchedule

__all__ = [
    "EnsembleStats",
    "RateEstimate",
    "simulate_ensemble",
    "analytic_ms_recursion",
    "estimate_ms_rate",
    "moment_map_radius",
    "STATE_GUARD",
]

STATE_GUARD = 1e30
# fixed so that partial sums, and hence msq, do not depend on the worker count
BLOCK_SIZE = 256


@dataclass(frozen=True)
class EnsembleStats:
    """Ensemble average of ``|x(t)|^2`` for ``t = 0..T``.

    ``flagged[t]`` counts realizations frozen by the overflow guard at or
    before t; they keep contributing their last (guard-exceeding) value.
    """

    T: int
    n: int
    msq: np.ndarray
    flagged: np.ndarray
    seed: int
    noise_variance: float
    x0: np.ndarray
    terminal_norms: Optional[np.ndarray] = None

    @property
    def flagged_count(self) -> int:
        return int(self.flagged[-1])


@dataclass(frozen=True)
class RateEstimate:
    """Fit ``msq[t] ~ K * beta**t * |x0|^2`` over ``window = (start, end)``."""

    K: float
    beta: float
    window: tuple
    residual: float
    tol: float

    @property
    def stable(self) -> bool:
        return self.beta < 1.0 - self.tol


def _closed_loop_parts(sys, K, T):
    A = np.stack([sys.A(t) for t in range(T)])
    BK = np.stack([sys.B(t) @ K.K[t] for t in range(T)])
    return A, BK


def _step(A, BK, g, x):
    M = A[None, :, :] + g[:, None, None] * BK[None, :, :]
    return (M * x[:, None, :]).sum(axis=2)


def _run_block(args):
    (r0, r1, A, BK, ch, x0, T, seed, noise_sd, keep_terminal) = args
    nb = r1 - r0
    N = x0.size
    gam = np.stack([draw(ch, seed, r, T) for r in range(r0, r1)])
    if noise_sd > 0:
        noise = np.stack([stream_generator(seed, r, NOISE_STREAM).standard_normal((T, N))
                          for r in range(r0, r1)]) * noise_sd
    x = np.tile(x0, (nb, 1))
    norms = np.empty((nb, T + 1))
    norms[:, 0] = (x * x).sum(axis=1)
    alive = np.ones(nb, dtype=bool)
    frozen_at = np.full(nb, T + 1)
    for t in range(T):
        with np.errstate(over="ignore", invalid="ignore"):
            xn = _step(A[t], BK[t], gam[:, t], x)
        if noise_sd > 0:
            xn = xn + noise[:, t, :]
        x = np.where(alive[:, None], xn, x)
        with np.errstate(over="ignore", invalid="ignore"):
            nrm = (x * x).sum(axis=1)
        blown = alive & ~(nrm <= STATE_GUARD)
        if blown.any():
            alive &= ~blown
            frozen_at[blown] = t + 1
        norms[:, t + 1] = nrm
    acc = np.zeros(T + 1)
    for row in norms:
        acc += row
    flagged = (frozen_at[:, None] <= np.arange(T + 1)[None, :]).sum(axis=0)
    return acc, flagged, (norms[:, -1].copy() if keep_terminal else None)


def simulate_ensemble(sys: SystemModel, K: GainSchedule, ch: ChannelModel, x0, T: int, n: int,
                      seed: int = 42, noise_variance: float = 0.0, workers: int = 1,
                      keep_terminal: bool = False) -> EnsembleStats:
    """Simulate ``n`` realizations of the closed loop over ``T`` steps.

    Realization ``r`` draws ``gamma(t)`` from the ``(seed, r)`` channel stream
    and, when ``noise_variance > 0``, i.i.d. ``N(0, noise_variance I)`` state
    noise from a separate stream. Realizations are processed in fixed-size
    blocks and accumulated in realization order, so results are bit-identical
    for any ``workers``.
    """
    if n < 1:
        raise ValueError(f"need at least one realization, got n={n}")
    if K.T < T:
        raise ValueError(f"gain schedule covers {K.T} steps, horizon is {T}")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != sys.n_states:
        raise ValueError(f"x0 has {x0.size} entries, system has N={sys.n_states}")
    A, BK = _closed_loop_parts(sys, K, T)
    sd = math.sqrt(noise_variance) if noise_variance > 0 else 0.0
    jobs = [(r0, min(r0 + BLOCK_SIZE, n), A, BK, ch, x0, T, seed, sd, keep_terminal)
            for r0 in range(0, n, BLOCK_SIZE)]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_block, jobs))
    else:
        results = [_run_block(j) for j in jobs]
    total = np.zeros(T + 1)
    flagged = np.zeros(T + 1, dtype=int)
    for acc, fl, _ in results:
        total += acc
        flagged += fl
    terminal = np.concatenate([r[2] for r in results]) if keep_terminal else None
    msq = total / n
    # every realization starts at x0; averaging n copies can round
    msq[0] = float(x0 @ x0)
    return EnsembleStats(T, n, msq, flagged, int(seed), float(noise_variance), x0, terminal)


def analytic_ms_recursion(sys: SystemModel, K: GainSchedule, mu: float, sigma2: float, x0, T: int,
                          noise_variance: float = 0.0) -> np.ndarray:
    """Exact ``E|x(t)|^2``, ``t = 0..T``, from the second-moment recursion.

    ``S(t+1) = (A + mu BK) S (A + mu BK)' + sigma2 (BK) S (BK)' + noise_variance I``
    with ``S(0) = x0 x0'``; the result is ``trace(S(t))``.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    S = np.outer(x0, x0)
    out = np.empty(T + 1)
    out[0] = np.trace(S)
    eye = np.eye(sys.n_states)
    for t in range(T):
        BK = sys.B(t) @ K.K[t]
        Acl = sys.A(t) + mu * BK
        S = Acl @ S @ Acl.T + sigma2 * (BK @ S @ BK.T)
        if noise_variance:
            S = S + noise_variance * eye
        S = 0.5 * (S + S.T)
        out[t + 1] = np.trace(S)
    return out


def moment_map_radius(A_cl, BK, sigma2: float) -> float:
    """Spectral radius of ``S -> A_cl S A_cl' + sigma2 BK S BK'`` (constant loop)."""
    L = np.kron(A_cl, A_cl) + sigma2 * np.kron(BK, BK)
    return float(np.max(np.abs(np.linalg.eigvals(L))))


def estimate_ms_rate(stats: Union[EnsembleStats, np.ndarray], burn_in: float = 0.2, tol: float = 1e-3,
                     x0_norm2: Optional[float] = None) -> RateEstimate:
    """Least-squares fit of ``log msq[t]`` against t after the burn-in fraction.

    ``beta = exp(slope)`` and ``K = exp(intercept) / |x0|^2``. For a raw array
    ``|x0|^2`` defaults to 1. The loop is judged mean-square stable when
    ``beta < 1 - tol``.
    """
    if isinstance(stats, EnsembleStats):
        msq = stats.msq
        if x0_norm2 is None:
            x0_norm2 = float(stats.x0 @ stats.x0)
    else:
        msq = np.asarray(stats, dtype=float)
        if x0_norm2 is None:
            x0_norm2 = 1.0
    T = len(msq) - 1
    start = int(math.ceil(burn_in * T))
    t = np.arange(start, T + 1, dtype=float)
    y = msq[start:]
    if len(y) < 10:
        raise FitError(f"only {len(y)} points after burn-in; need at least 10")
    if not np.all(np.isfinite(y)):
        raise FitError("non-finite mean-square values in the fit window (overflow)")
    if np.any(y <= 0):
        raise FitError("nonpositive mean-square values in the fit window; "
                       "rerun without noise or shorten the horizon")
    if x0_norm2 <= 0:
        raise FitError("|x0|^2 must be positive to normalize the prefactor")
    ly = np.log(y)
    tc = t - t.mean()
    slope = float((tc @ (ly - ly.mean())) / (tc @ tc))
    intercept = float(ly.mean() - slope * t.mean())
    resid = float(np.sqrt(np.mean((ly - intercept - slope * t) ** 2)))
    return RateEstimate(math.exp(intercept) / x0_norm2, math.exp(slope), (start, T), resid, float(tol))
