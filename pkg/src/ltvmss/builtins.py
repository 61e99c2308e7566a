"""Built-in example systems.

``example1``
    Sampled oscillator whose continuous transition matrix is
    ``Phi(s, 0) = [[e^{s/2} cos s, e^{-s} sin s], [-e^{s/2} sin s, e^{-s} cos s]]``.
    Frozen-time eigenvalues lie in the left half plane yet the origin is
    unstable. The discrete system is ``A(t) = Phi(dt (t+1), 0) Phi(dt t, 0)^-1``
    with ``B = [1, 1]'``.
``example2``
    Period-3 system with three positive Lyapunov exponents.
``example2-verbatim``
    ``example2`` with the (3, 3) entry of the third state matrix as printed
    (``+1.2``); that version does not reproduce the published exponents.
"""

from __future__ import annotations

import numpy as np

from .exceptions import ConfigError
from .model import SystemModel

__all__ = ["builtin_system", "BUILTIN_NAMES", "oscillator_transition"]

_EX2_A = [
    [[-0.4, 0.8, 1.2], [1.0, 0.8, -0.4], [0.6, -0.8, 0.4]],
    [[1.6, -1.4, 1.2], [0.8, -1.6, 2.8], [1.6, -2.2, 1.2]],
    [[-0.8, 1.6, 1.2], [1.6, -1.2, -1.2], [1.6, -2.4, -1.2]],
]
_EX2_B = [[[1.0], [1.0], [1.0]], [[2.0], [1.0], [1.0]], [[1.0], [1.0], [2.0]]]

BUILTIN_NAMES = ("example1", "example2", "example2-verbatim")


def oscillator_transition(s: float) -> np.ndarray:
    """Continuous transition matrix ``Phi(s, 0)`` of the example-1 oscillator."""
    c, sn = np.cos(s), np.sin(s)
    return np.array([[np.exp(0.5 * s) * c, np.exp(-s) * sn],
                     [-np.exp(0.5 * s) * sn, np.exp(-s) * c]])


def _rotation(s):
    c, sn = np.cos(s), np.sin(s)
    return np.array([[c, sn], [-sn, c]])


def _example1(dt: float) -> SystemModel:
    # Phi(s, 0) = Rot(s) diag(e^{s/2}, e^{-s}); the step map therefore never
    # forms the exponentially large factors explicitly.
    if not dt > 0:
        raise ConfigError(f"dt: must be positive, got {dt!r}")
    step = np.diag([np.exp(0.5 * dt), np.exp(-dt)])

    def a_fn(t):
        return _rotation(dt * (t + 1)) @ step @ _rotation(-dt * t)

    return SystemModel.generator(a_fn, np.array([[1.0], [1.0]]), 2, 1, name="example1")


def builtin_system(name: str, dt: float = 0.1) -> SystemModel:
    """Return one of the named example systems (``dt`` applies to example1)."""
    if name == "example1":
        return _example1(float(dt))
    if name == "example2":
        return SystemModel.periodic(_EX2_A, _EX2_B, name="example2")
    if name == "example2-verbatim":
        A = [np.array(a) for a in _EX2_A]
        A[2] = A[2].copy()
        A[2][2, 2] = 1.2
        return SystemModel.periodic(A, _EX2_B, name="example2-verbatim")
    raise ConfigError(f"builtin: unknown system {name!r}; choose from {', '.join(BUILTIN_NAMES)}")
