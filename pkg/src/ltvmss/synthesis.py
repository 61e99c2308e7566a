"""Time-varying Riccati recursion, mean-square gains and Lyapunov certificates.

Closed loop under state feedback ``u(t) = K(t) x(t)``::

    x(t+1) = (A(t) + (mu + Delta(t)) B(t) K(t)) x(t),   E[Delta] = 0, E[Delta^2] = sigma2
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .exceptions import DivergenceError, NumericalError, SynthesisError
from .model import SystemModel

__all__ = [
    "RiccatiSchedule",
    "GainSchedule",
    "CertificateReport",
    "riccati_backward",
    "optimal_gain",
    "expected_quadratic",
    "check_mss_certificate",
    "build_certificate",
    "synthesize",
    "OVERFLOW_GUARD",
]

OVERFLOW_GUARD = 1e12
STANDARD = "standard"
MEAN_SQUARE = "mean-square"


def _sym(X):
    return 0.5 * (X + X.T)


@dataclass(frozen=True)
class RiccatiSchedule:
    """``P(t)`` for ``t = 0..T`` together with its observed eigenvalue bounds.

    ``alpha1``/``alpha2`` exclude the ``discard`` entries nearest the terminal
    time, which still remember the terminal condition.
    """

    P: tuple
    R: Optional[object]
    alpha1: float
    alpha2: float
    terminal: np.ndarray
    discard: int = 0
    form: str = STANDARD

    @property
    def T(self) -> int:
        return len(self.P) - 1


@dataclass(frozen=True)
class GainSchedule:
    K: tuple
    mu: float
    sigma2: float

    @property
    def T(self) -> int:
        return len(self.K)


def _sqrt_psd(P):
    w, V = np.linalg.eigh(P)
    return V * np.sqrt(np.clip(w, 0.0, None))


def _r_at(R, t, n):
    if R is None:
        return np.eye(n)
    if callable(R):
        return np.asarray(R(t), dtype=float)
    if np.isscalar(R):
        return float(R) * np.eye(n)
    R = np.asarray(R, dtype=float)
    if R.ndim == 2:
        return R
    return R[t]


def _bounds(P, discard):
    keep = P[: len(P) - discard] if discard < len(P) else P
    lo, hi = np.inf, -np.inf
    for p in keep:
        ev = np.linalg.eigvalsh(p)
        lo, hi = min(lo, ev[0]), max(hi, ev[-1])
    return float(lo), float(hi)


def riccati_backward(sys: SystemModel, T: int, R: Union[float, np.ndarray, Sequence, Callable, None] = None,
                     terminal: Optional[np.ndarray] = None, channel: Optional[tuple] = None,
                     discard: Optional[int] = None) -> RiccatiSchedule:
    """Backward Riccati recursion from ``P(T) = terminal``.

    Without ``channel`` the standard regulator form is used::

        P(t) = A'PA - A'PB (I + B'PB)^-1 B'PA + R(t),      P = P(t+1)

    With ``channel=(mu, sigma2)`` the mean-square form, whose optimal gain
    balances the channel variance, is used instead::

        P(t) = A'PA - mu^2/(mu^2+sigma2) A'PB (B'PB)^-1 B'PA + R(t)

    Parameters
    ----------
    sys : SystemModel
    T : int
        Horizon; the schedule covers ``t = 0..T``.
    R : scalar, matrix, sequence of matrices or callable, optional
        Regularization ``R(t)``; identity by default.
    terminal : ndarray, optional
        ``P(T)``; identity by default.
    channel : (mu, sigma2), optional
        Channel moments selecting the mean-square form.
    discard : int, optional
        Entries nearest T excluded from the bounds; default ``T // 10``.

    Raises
    ------
    NumericalError
        If some ``P(t)`` overflows or has an eigenvalue below zero by more
        than round-off (``.t`` names the step).
    """
    if T < 1:
        raise ValueError(f"horizon T must be >= 1, got {T}")
    n = sys.n_states
    P = np.eye(n) if terminal is None else _sym(np.asarray(terminal, dtype=float))
    if np.linalg.eigvalsh(P)[0] <= 0:
        raise ValueError("terminal matrix must be symmetric positive definite")
    terminal = P.copy()
    if channel is not None:
        mu, sigma2 = channel
        c = mu * mu / (mu * mu + sigma2) if mu * mu + sigma2 > 0 else 0.0
    out = [None] * (T + 1)
    out[T] = P
    m = sys.n_inputs
    eps = np.finfo(float).eps
    for t in range(T - 1, -1, -1):
        A, B = sys.A(t), sys.B(t)
        Rt = _r_at(R, t, n)
        if np.linalg.eigvalsh(_sym(Rt))[0] <= 0:
            raise ValueError(f"R({t}) must be symmetric positive definite")
        # P = L L'; with M = L'A and Z = L'B both corrections become Gram
        # matrices, so P(t) - R(t) is PSD by construction even when P(t+1)
        # is badly conditioned.
        L = _sqrt_psd(P)
        M = L.T @ A
        Z = L.T @ B
        if channel is None:
            C = np.linalg.cholesky(np.eye(n) + Z @ Z.T)
            G = np.linalg.solve(C, M)
            core = G.T @ G
        else:
            Qz, Rz = np.linalg.qr(Z, mode="complete")
            d = np.abs(np.diagonal(Rz))
            if d.min() <= 1e-12 * max(d.max(), np.finfo(float).tiny):
                raise NumericalError(f"Riccati step at t={t}: singular B'P(t+1)B", t=t)
            H = Qz[:, m:].T @ M
            core = (1.0 - c) * (M.T @ M) + c * (H.T @ H)
        P = _sym(core + Rt)
        if not np.all(np.isfinite(P)):
            raise NumericalError(f"Riccati recursion overflowed at t={t}", t=t)
        ev = np.linalg.eigvalsh(P)
        if ev[0] <= 0 and -ev[0] > n * eps * ev[-1]:
            raise NumericalError(f"Riccati recursion lost positive definiteness at t={t}", t=t)
        out[t] = P
    if discard is None:
        discard = T // 10
    a1, a2 = _bounds(out, discard)
    return RiccatiSchedule(tuple(out), R, a1, a2, terminal, discard,
                           STANDARD if channel is None else MEAN_SQUARE)


def optimal_gain(sys: SystemModel, P: RiccatiSchedule, mu: float, sigma2: float) -> GainSchedule:
    """``K(t) = -mu/(mu^2+sigma2) (B'P(t+1)B)^-1 B'P(t+1)A`` for ``t < T``.

    The factor is unchanged when every ``P`` is scaled by a positive constant.
    With ``mu == 0`` the gains degenerate to zero.
    """
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be nonnegative, got {sigma2}")
    K = []
    for t in range(P.T):
        A, B = sys.A(t), sys.B(t)
        if mu == 0:
            K.append(np.zeros((sys.n_inputs, sys.n_states)))
            continue
        Pn = P.P[t + 1]
        BP = B.T @ Pn
        BPB = BP @ B
        if np.linalg.cond(BPB) > 1e14:
            raise SynthesisError(f"gain synthesis at t={t}: B'P(t+1)B is singular", t=t)
        K.append(-mu / (mu * mu + sigma2) * np.linalg.solve(BPB, BP @ A))
    return GainSchedule(tuple(K), float(mu), float(sigma2))


def expected_quadratic(sys: SystemModel, t: int, Q, K, mu: float, sigma2: float) -> np.ndarray:
    """``E[(A + gamma B K)' Q (A + gamma B K)]`` expanded in the channel moments."""
    A, B = sys.A(t), sys.B(t)
    Q = np.asarray(Q, dtype=float)
    K = np.asarray(K, dtype=float)
    BK = B @ K
    QBK = Q @ BK
    AQBK = A.T @ QBK
    return (A.T @ Q @ A + mu * AQBK + mu * AQBK.T
            + (mu * mu + sigma2) * (BK.T @ QBK))


@dataclass(frozen=True)
class CertificateReport:
    """Per-step decrease margins ``min eig(P(t) - E[A' P(t+1) A])``."""

    margins: np.ndarray
    tolerances: np.ndarray
    alpha1: float
    alpha2: float
    passed: bool
    first_failure: Optional[int]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "first_failure": self.first_failure,
            "alpha1": self.alpha1,
            "alpha2": self.alpha2,
            "min_margin": float(np.min(self.margins)) if len(self.margins) else None,
            "margins": [float(m) for m in self.margins],
        }


def check_mss_certificate(sys: SystemModel, P: RiccatiSchedule, K: GainSchedule,
                          mu: float, sigma2: float) -> CertificateReport:
    """Verify ``E[A_cl' P(t+1) A_cl] < P(t)`` and uniform bounds on ``P``.

    A step passes when its margin exceeds ``1e-9 * trace(P(t)) / N`` and
    ``P(t)`` itself is positive definite.
    """
    n = sys.n_states
    steps = min(P.T, K.T)
    margins = np.empty(steps)
    tols = np.empty(steps)
    lo, hi = np.inf, -np.inf
    for t in range(steps):
        Pt = P.P[t]
        ev = np.linalg.eigvalsh(_sym(Pt))
        lo, hi = min(lo, ev[0]), max(hi, ev[-1])
        E = expected_quadratic(sys, t, P.P[t + 1], K.K[t], mu, sigma2)
        margins[t] = np.linalg.eigvalsh(_sym(Pt - E))[0]
        tols[t] = 1e-9 * np.trace(Pt) / n
    ok = (margins > tols) & (lo > 0)
    bad = np.flatnonzero(~ok)
    return CertificateReport(margins, tols, float(lo), float(hi), bool(ok.all()),
                             int(bad[0]) if bad.size else None)


def build_certificate(sys: SystemModel, K: GainSchedule, mu: float, sigma2: float,
                      truncation: int) -> RiccatiSchedule:
    """Truncated series certificate ``P(t) = sum_n E[Phi_cl(n, t)' Phi_cl(n, t)]``.

    Runs ``P(t) = E[A_cl(t)' (I + P(t+1)) A_cl(t)]`` backward from a zero
    terminal value at ``K.T``. The returned schedule stops at
    ``K.T - truncation``, so every entry carries at least ``truncation`` terms.

    Raises
    ------
    DivergenceError
        When an entry exceeds 1e12, i.e. the closed loop is not mean-square
        stable at this truncation.
    """
    if truncation < 1:
        raise ValueError(f"truncation must be >= 1, got {truncation}")
    if K.T < truncation:
        raise ValueError(f"gain schedule of length {K.T} is shorter than truncation {truncation}")
    n = sys.n_states
    eye = np.eye(n)
    P = np.zeros((n, n))
    out = [None] * (K.T + 1)
    out[K.T] = P
    for t in range(K.T - 1, -1, -1):
        P = _sym(expected_quadratic(sys, t, eye + P, K.K[t], mu, sigma2))
        if not np.all(np.isfinite(P)) or np.abs(P).max() > OVERFLOW_GUARD:
            raise DivergenceError(f"certificate series diverged at t={t} (entries > {OVERFLOW_GUARD:g})", t=t)
        out[t] = P
    kept = tuple(out[: K.T - truncation + 1])
    lo, hi = _bounds(kept, 0)
    return RiccatiSchedule(kept, None, lo, hi, kept[-1], 0, "series")


def synthesize(sys: SystemModel, mu: float, sigma2: float, T: int, form: str = MEAN_SQUARE,
               R=None, lookahead: Optional[int] = None) -> tuple:
    """Riccati schedule and gains on ``[0, T)``.

    The backward recursion starts ``lookahead`` steps beyond T (default
    ``max(50, T // 5)``, clipped to a recorded horizon) so gains on
    ``[0, T)`` are not shaped by the terminal condition.
    """
    if form not in (STANDARD, MEAN_SQUARE):
        raise ValueError(f"unknown Riccati form {form!r}")
    if lookahead is None:
        lookahead = max(50, T // 5)
    total = T + lookahead
    if sys.horizon is not None:
        total = min(total, sys.horizon)
    if total < T:
        raise ValueError(f"horizon T={T} exceeds the recorded horizon {sys.horizon}")
    channel = (mu, sigma2) if form == MEAN_SQUARE else None
    sched = riccati_backward(sys, total, R=R, channel=channel, discard=total - T)
    gains = optimal_gain(sys, sched, mu, sigma2)
    return sched, GainSchedule(gains.K[:T], gains.mu, gains.sigma2)
