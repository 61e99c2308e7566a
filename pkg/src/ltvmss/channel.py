"""Scalar multiplicative channel ``gamma(t)`` with exact moments.

Analysis code only ever sees ``(mu, sigma2)``; simulation draws from the
concrete law. Every realization owns an independent counter-based (Philox)
stream keyed by ``(seed, realization)``, so a draw is a pure function of
``(seed, realization, t)`` regardless of how realizations are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .exceptions import ConfigError

__all__ = [
    "ChannelModel",
    "moments",
    "stream_generator",
    "draw",
    "sample_stream",
    "GAMMA_STREAM",
    "NOISE_STREAM",
]

GAMMA_STREAM = 0
NOISE_STREAM = 1

_KINDS = {
    "bernoulli": ("p",),
    "gaussian": ("mu", "sigma2"),
    "uniform": ("lo", "hi"),
    "two-point": ("v1", "v2", "q"),
    "deterministic": ("mu",),
}


@dataclass(frozen=True)
class ChannelModel:
    """A memoryless channel law.

    ``two-point`` takes value ``v1`` with probability ``q`` and ``v2``
    otherwise.
    """

    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"channel.kind: unknown kind {self.kind!r}; choose from {', '.join(_KINDS)}")
        names = _KINDS[self.kind]
        if len(self.params) != len(names):
            raise ConfigError(f"channel: {self.kind} takes parameters {names}")
        for name, v in zip(names, self.params):
            if not math.isfinite(v):
                raise ConfigError(f"channel.{name}: must be finite, got {v!r}")
        p = dict(zip(names, self.params))
        if self.kind == "bernoulli" and not 0.0 <= p["p"] <= 1.0:
            raise ConfigError(f"channel.p: must lie in [0, 1], got {p['p']}")
        if self.kind == "gaussian" and p["sigma2"] < 0:
            raise ConfigError(f"channel.sigma2: must be nonnegative, got {p['sigma2']}")
        if self.kind == "uniform" and not p["lo"] <= p["hi"]:
            raise ConfigError(f"channel.hi: must be >= lo, got lo={p['lo']}, hi={p['hi']}")
        if self.kind == "two-point" and not 0.0 <= p["q"] <= 1.0:
            raise ConfigError(f"channel.q: must lie in [0, 1], got {p['q']}")

    @classmethod
    def bernoulli(cls, p):
        return cls("bernoulli", (float(p),))

    @classmethod
    def gaussian(cls, mu, sigma2):
        return cls("gaussian", (float(mu), float(sigma2)))

    @classmethod
    def uniform(cls, lo, hi):
        return cls("uniform", (float(lo), float(hi)))

    @classmethod
    def two_point(cls, v1, v2, q):
        return cls("two-point", (float(v1), float(v2), float(q)))

    @classmethod
    def deterministic(cls, mu):
        return cls("deterministic", (float(mu),))

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelModel":
        if not isinstance(d, dict) or "kind" not in d:
            raise ConfigError("channel: expected an object with a 'kind' field")
        kind = d["kind"]
        if kind not in _KINDS:
            raise ConfigError(f"channel.kind: unknown kind {kind!r}; choose from {', '.join(_KINDS)}")
        vals = []
        for name in _KINDS[kind]:
            if name not in d:
                raise ConfigError(f"channel.{name}: missing for kind {kind!r}")
            try:
                vals.append(float(d[name]))
            except (TypeError, ValueError):
                raise ConfigError(f"channel.{name}: expected a number, got {d[name]!r}") from None
        return cls(kind, tuple(vals))

    def to_dict(self) -> dict:
        return {"kind": self.kind, **dict(zip(_KINDS[self.kind], self.params))}

    def moments(self) -> tuple[float, float]:
        return moments(self)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` values from ``rng``; consumption is sequential in t."""
        k, p = self.kind, self.params
        if k == "bernoulli":
            return (rng.random(size) < p[0]).astype(float)
        if k == "gaussian":
            return p[0] + math.sqrt(p[1]) * rng.standard_normal(size)
        if k == "uniform":
            return p[0] + (p[1] - p[0]) * rng.random(size)
        if k == "two-point":
            return np.where(rng.random(size) < p[2], p[0], p[1])
        return np.full(size, p[0])


def moments(ch: ChannelModel) -> tuple[float, float]:
    """Exact ``(E[gamma], Var[gamma])``."""
    k, p = ch.kind, ch.params
    if k == "bernoulli":
        return p[0], p[0] * (1.0 - p[0])
    if k == "gaussian":
        return p[0], p[1]
    if k == "uniform":
        return 0.5 * (p[0] + p[1]), (p[1] - p[0]) ** 2 / 12.0
    if k == "two-point":
        v1, v2, q = p
        return q * v1 + (1 - q) * v2, q * (1 - q) * (v1 - v2) ** 2
    return p[0], 0.0


def stream_generator(seed: int, realization: int, stream: int = GAMMA_STREAM) -> np.random.Generator:
    """Independent Philox generator for ``(seed, stream, realization)``."""
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF,
                                spawn_key=(int(stream), int(realization)))
    return np.random.Generator(np.random.Philox(ss))


def draw(ch: ChannelModel, seed: int, realization: int, count: int) -> np.ndarray:
    """``gamma(0), ..., gamma(count-1)`` for one realization."""
    return ch.sample(stream_generator(seed, realization, GAMMA_STREAM), count)


def sample_stream(ch: ChannelModel, seed: int, realization: int, chunk: int = 4096) -> Iterator[float]:
    """Endless iterator over ``gamma(t)``; agrees elementwise with :func:`draw`."""
    rng = stream_generator(seed, realization, GAMMA_STREAM)
    while True:
        yield from ch.sample(rng, chunk).tolist()
