"""Discrete-time linear time-varying systems.

A system is the sequence of pairs ``(A(t), B(t))`` driving

    x(t+1) = A(t) x(t) + gamma(t) B(t) u(t)

Three sources are supported: a periodic list of matrices, a closed-form
generator callable at any ``t >= 0`` and a finite recorded sequence.

Transition matrices use the latest-factor-leftmost convention,
``Phi(t1, t0) = A(t1-1) ... A(t0)``, so that ``x(t) = Phi(t, 0) x(0)``.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .exceptions import ConfigError, HorizonError

__all__ = [
    "SystemModel",
    "ControllabilityReport",
    "BlockFit",
    "DecompositionReport",
    "transition_matrix",
    "controllability_gramian",
    "check_uniform_controllability",
    "antistability_margin",
    "validate_decomposition",
    "max_abs_entry",
]

PERIODIC = "periodic"
GENERATOR = "generator"
SEQUENCE = "sequence"


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _as_matrix_list(mats, name):
    out = []
    for i, m in enumerate(mats):
        a = np.asarray(m, dtype=float)
        if a.ndim == 1:
            a = a.reshape(-1, 1) if name == "B" else a.reshape(1, -1)
        if a.ndim != 2:
            raise ConfigError(f"{name}[{i}]: expected a 2-D matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ConfigError(f"{name}[{i}]: entries must be finite")
        out.append(_frozen(a))
    return out


@dataclass(frozen=True, eq=False)
class SystemModel:
    """An LTV pair sequence ``(A(t), B(t))`` with N states and M inputs.

    Build instances with :meth:`periodic`, :meth:`generator` or
    :meth:`sequence`; the constructor itself performs no validation.
    """

    n_states: int
    n_inputs: int
    kind: str
    period: Optional[int] = None
    horizon: Optional[int] = None
    partition: Optional[tuple] = None
    name: Optional[str] = None
    _a_list: tuple = ()
    _b_list: tuple = ()
    _a_fn: Optional[Callable] = None
    _b_fn: Optional[Callable] = None
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    # -- constructors -----------------------------------------------------

    @classmethod
    def periodic(cls, A: Sequence, B: Sequence, partition=None, name=None) -> "SystemModel":
        """Periodic system with ``A(t) = A[t % p]`` and ``B(t) = B[t % p]``."""
        A = _as_matrix_list(A, "A")
        B = _as_matrix_list(B, "B")
        if not A:
            raise ConfigError("A: at least one matrix is required")
        if len(A) != len(B):
            raise ConfigError(f"B: period mismatch, {len(A)} A matrices but {len(B)} B matrices")
        n, m = _check_dims(A, B)
        sys = cls(n, m, PERIODIC, period=len(A), partition=_partition(partition, n),
                  name=name, _a_list=tuple(A), _b_list=tuple(B))
        sys._validate_partition(range(len(A)))
        return sys

    @classmethod
    def sequence(cls, A: Sequence, B: Sequence, partition=None, name=None) -> "SystemModel":
        """Finite recorded sequence; queries at ``t >= len(A)`` raise HorizonError."""
        A = _as_matrix_list(A, "A")
        B = _as_matrix_list(B, "B")
        if not A:
            raise ConfigError("A: at least one matrix is required")
        if len(A) != len(B):
            raise ConfigError(f"B: horizon mismatch, {len(A)} A matrices but {len(B)} B matrices")
        n, m = _check_dims(A, B)
        sys = cls(n, m, SEQUENCE, horizon=len(A), partition=_partition(partition, n),
                  name=name, _a_list=tuple(A), _b_list=tuple(B))
        sys._validate_partition(range(len(A)))
        return sys

    @classmethod
    def generator(cls, a_fn: Callable[[int], np.ndarray], b_fn, n_states: int,
                  n_inputs: int, partition=None, name=None) -> "SystemModel":
        """Closed-form system; ``a_fn(t)`` and ``b_fn(t)`` are memoized per t.

        ``b_fn`` may also be a constant matrix.
        """
        if not callable(b_fn):
            b_const = _frozen(np.asarray(b_fn, dtype=float).reshape(n_states, n_inputs))
            b_fn = lambda t: b_const  # noqa: E731
        if n_inputs > n_states or n_inputs < 1 or n_states < 1:
            raise ConfigError(f"dimensions: need 1 <= M <= N, got N={n_states}, M={n_inputs}")
        sys = cls(n_states, n_inputs, GENERATOR, partition=_partition(partition, n_states),
                  name=name, _a_fn=a_fn, _b_fn=b_fn)
        sys.A(0)
        sys.B(0)
        return sys

    # -- queries -----------------------------------------------------------

    def _check_t(self, t):
        if t < 0:
            raise HorizonError(f"negative time index {t}")
        if self.kind == SEQUENCE and t >= self.horizon:
            raise HorizonError(f"time index {t} beyond recorded horizon {self.horizon}")

    def A(self, t: int) -> np.ndarray:
        """State matrix at time t (read-only array)."""
        t = int(t)
        self._check_t(t)
        if self.kind == PERIODIC:
            return self._a_list[t % self.period]
        if self.kind == SEQUENCE:
            return self._a_list[t]
        return self._generated(t)[0]

    def B(self, t: int) -> np.ndarray:
        """Input matrix at time t (read-only array)."""
        t = int(t)
        self._check_t(t)
        if self.kind == PERIODIC:
            return self._b_list[t % self.period]
        if self.kind == SEQUENCE:
            return self._b_list[t]
        return self._generated(t)[1]

    def _generated(self, t):
        hit = self._cache.get(t)
        if hit is not None:
            return hit
        a = _frozen(self._a_fn(t))
        b = _frozen(np.asarray(self._b_fn(t), dtype=float).reshape(self.n_states, self.n_inputs))
        if a.shape != (self.n_states, self.n_states):
            raise ConfigError(f"A({t}): expected {self.n_states}x{self.n_states}, got {a.shape}")
        with self._lock:
            self._cache.setdefault(t, (a, b))
        return self._cache[t]

    def scaled(self, c: float) -> "SystemModel":
        """The system with ``A(t)`` replaced by ``c * A(t)``."""
        return self.transformed(lambda a: c * a)

    def transformed(self, fn: Callable[[np.ndarray], np.ndarray], b_fn=None) -> "SystemModel":
        """Apply ``fn`` to every ``A(t)`` (and ``b_fn`` to every ``B(t)``)."""
        b_fn = b_fn or (lambda b: b)
        if self.kind == GENERATOR:
            return SystemModel.generator(lambda t: fn(self.A(t)), lambda t: b_fn(self.B(t)),
                                         self.n_states, self.n_inputs)
        A = [fn(a) for a in self._a_list]
        B = [b_fn(b) for b in self._b_list]
        return (SystemModel.periodic if self.kind == PERIODIC else SystemModel.sequence)(A, B)

    def _validate_partition(self, times):
        if self.partition is None:
            return
        n1 = self.partition[0]
        for t in times:
            a = self.A(t)
            off = max(np.abs(a[:n1, n1:]).max(initial=0.0), np.abs(a[n1:, :n1]).max(initial=0.0))
            if off > 1e-12 * max(1.0, np.abs(a).max()):
                raise ConfigError(f"partition: A({t}) is not block diagonal for split {self.partition}")


def _check_dims(A, B):
    n = A[0].shape[0]
    m = B[0].shape[1]
    for i, a in enumerate(A):
        if a.shape != (n, n):
            raise ConfigError(f"A[{i}]: expected {n}x{n} matrix, got {a.shape[0]}x{a.shape[1]}")
    for i, b in enumerate(B):
        if b.shape != (n, m):
            raise ConfigError(f"B[{i}]: expected {n}x{m} matrix, got {b.shape[0]}x{b.shape[1]}")
    if m > n:
        raise ConfigError(f"B: input dimension M={m} exceeds state dimension N={n}")
    return n, m


def _partition(partition, n):
    if partition is None:
        return None
    try:
        n1, n2 = (int(v) for v in partition)
    except (TypeError, ValueError):
        raise ConfigError(f"partition: expected [N1, N2], got {partition!r}") from None
    if n1 < 0 or n2 < 0 or n1 + n2 != n:
        raise ConfigError(f"partition: N1 + N2 must equal N={n}, got {partition!r}")
    return (n1, n2)


# -- transition matrices and Gramians ---------------------------------------


def transition_matrix(sys: SystemModel, t0: int, t1: int) -> np.ndarray:
    """Ordered product ``A(t1-1) @ ... @ A(t0)``; identity when ``t1 == t0``."""
    if t0 < 0 or t1 < t0:
        raise HorizonError(f"need 0 <= t0 <= t1, got t0={t0}, t1={t1}")
    phi = np.eye(sys.n_states)
    for t in range(t0, t1):
        phi = sys.A(t) @ phi
    return phi


def controllability_gramian(sys: SystemModel, t0: int, k: int) -> np.ndarray:
    """``W(t0, t0+k) = sum_t Phi(t1, t+1) B(t) B(t)' Phi(t1, t+1)'``."""
    if k < 1:
        raise ValueError("window length k must be >= 1")
    t1 = t0 + k
    W = np.zeros((sys.n_states, sys.n_states))
    for t in range(t0, t1):
        g = transition_matrix(sys, t + 1, t1) @ sys.B(t)
        W += g @ g.T
    return 0.5 * (W + W.T)


@dataclass(frozen=True)
class ControllabilityReport:
    k: int
    gramians: list
    min_eigenvalues: list
    alpha0: float
    alpha1: float
    beta0: float
    beta1: float
    passed: bool


def check_uniform_controllability(sys: SystemModel, k: int, windows: int) -> ControllabilityReport:
    """Test ``W(t0, t0+k) > 0`` over ``windows`` consecutive start times.

    A Gramian counts as positive definite when its smallest eigenvalue exceeds
    ``1e-9 * max(1, trace(W)/N)``. The reported alpha bounds are the extremal
    eigenvalues of ``W^-1`` and the beta bounds those of ``Phi' W^-1 Phi``;
    they are ``nan`` when some Gramian is singular.
    """
    if k < 1 or windows < 1:
        raise ValueError("k and windows must be >= 1")
    n = sys.n_states
    gramians, mins = [], []
    passed = True
    alphas, betas = [], []
    for t0 in range(windows):
        W = controllability_gramian(sys, t0, k)
        ev = np.linalg.eigvalsh(W)
        gramians.append(W)
        mins.append(float(ev[0]))
        if ev[0] <= 1e-9 * max(1.0, np.trace(W) / n):
            passed = False
            continue
        alphas.extend([1.0 / ev[-1], 1.0 / ev[0]])
        phi = transition_matrix(sys, t0, t0 + k)
        M = phi.T @ np.linalg.solve(W, phi)
        evm = np.linalg.eigvalsh(0.5 * (M + M.T))
        betas.extend([evm[0], evm[-1]])
    if passed:
        a0, a1, b0, b1 = min(alphas), max(alphas), min(betas), max(betas)
    else:
        a0 = a1 = b0 = b1 = float("nan")
    return ControllabilityReport(k, gramians, mins, float(a0), float(a1), float(b0), float(b1), passed)


def antistability_margin(Mx) -> float:
    """Smallest singular value, ``inf{ |Mx| : |x| = 1 }``."""
    Mx = np.atleast_2d(np.asarray(Mx, dtype=float))
    if Mx.shape[0] != Mx.shape[1]:
        raise ValueError(f"square matrix required, got shape {Mx.shape}")
    return float(np.linalg.svd(Mx, compute_uv=False)[-1])


def max_abs_entry(sys: SystemModel, t0: int, t1: int) -> float:
    """Largest absolute entry of ``A(t)`` over ``t0 <= t < t1``."""
    return float(max(np.abs(sys.A(t)).max() for t in range(t0, t1)))


@dataclass(frozen=True)
class BlockFit:
    """Exponential fit ``value(l) ~ K * beta**l`` over window lengths ``l``."""

    lengths: np.ndarray
    values: np.ndarray
    beta: float
    K: float


@dataclass(frozen=True)
class DecompositionReport:
    partition: tuple
    window: int
    block_diagonal: bool
    max_offdiagonal: float
    antistable: Optional[BlockFit]
    stable: Optional[BlockFit]
    passed: bool


def _fit(lengths, values, worst):
    logs = np.log(values)
    slope, intercept = np.polyfit(lengths, logs, 1)
    beta = float(np.exp(slope))
    # K tight enough that the bound holds on every sampled length
    K = float(worst(values / beta ** lengths))
    return BlockFit(lengths, values, beta, K)


def validate_decomposition(sys: SystemModel, window: int = 30, tol: float = 1e-6) -> DecompositionReport:
    """Check the stable/antistable block split declared by ``sys.partition``.

    Products of the leading ``N1`` block over ``[k, k+l)`` must expand
    uniformly (smallest singular value growing like ``beta_u**l``, ``beta_u > 1``)
    and products of the trailing block must contract (norm ``~ beta_s**l``,
    ``beta_s < 1``). Start times ``k`` range over ``[0, window)`` and the
    worst case per length enters a least-squares fit of log value vs l.
    """
    if sys.partition is None:
        raise ConfigError("partition: validate_decomposition requires a declared (N1, N2) split")
    n1, n2 = sys.partition
    max_off = 0.0
    for t in range(2 * window):
        a = sys.A(t)
        max_off = max(max_off, np.abs(a[:n1, n1:]).max(initial=0.0), np.abs(a[n1:, :n1]).max(initial=0.0))
    block_diag = max_off <= 1e-12 * max(1.0, max_abs_entry(sys, 0, 2 * window))

    lengths = np.arange(1, window + 1, dtype=float)
    worst_margin = np.full(window, np.inf)
    worst_norm = np.zeros(window)
    for k in range(window):
        pu = np.eye(n1)
        ps = np.eye(n2)
        for l in range(window):
            a = sys.A(k + l)
            if n1:
                pu = a[:n1, :n1] @ pu
                worst_margin[l] = min(worst_margin[l], antistability_margin(pu))
            if n2:
                ps = a[n1:, n1:] @ ps
                worst_norm[l] = max(worst_norm[l], np.linalg.norm(ps, 2))

    unstable = stable = None
    ok = block_diag
    if n1:
        if np.any(worst_margin <= 0):
            ok = False
        else:
            unstable = _fit(lengths, worst_margin, np.min)
            ok = ok and unstable.beta > 1 + tol
    if n2:
        if np.any(worst_norm <= 0):
            stable = BlockFit(lengths, worst_norm, 0.0, 0.0)
        else:
            stable = _fit(lengths, worst_norm, np.max)
            ok = ok and stable.beta < 1 - tol
    return DecompositionReport(sys.partition, window, bool(block_diag), float(max_off),
                               unstable, stable, bool(ok))
