"""JSON descriptions of systems and channels, and the resolved run config."""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Optional

from .builtins import builtin_system
from .channel import ChannelModel
from .exceptions import ConfigError
from .model import SystemModel

__all__ = ["RunConfig", "load_json_arg", "system_from_dict", "channel_from_dict", "dumps"]


def load_json_arg(value, what: str):
    """Parse ``value`` as a path to a JSON file or as inline JSON text."""
    if isinstance(value, (dict, list)):
        return value
    text = value
    if os.path.exists(value):
        with open(value, encoding="utf-8") as fh:
            text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what}: malformed JSON ({exc.msg} at line {exc.lineno})") from None


def _matrix_list(d, key):
    if key not in d:
        raise ConfigError(f"system.{key}: missing")
    mats = d[key]
    if not isinstance(mats, list) or not mats:
        raise ConfigError(f"system.{key}: expected a non-empty list of matrices")
    out = []
    for i, m in enumerate(mats):
        if not isinstance(m, list) or not all(isinstance(r, list) for r in m):
            raise ConfigError(f"system.{key}[{i}]: expected an array of row arrays")
        try:
            rows = [[float(v) for v in r] for r in m]
        except (TypeError, ValueError):
            raise ConfigError(f"system.{key}[{i}]: entries must be numbers") from None
        if len({len(r) for r in rows}) != 1:
            raise ConfigError(f"system.{key}[{i}]: ragged rows")
        if not all(math.isfinite(v) for r in rows for v in r):
            raise ConfigError(f"system.{key}[{i}]: entries must be finite")
        out.append(rows)
    return out


def system_from_dict(d: dict) -> SystemModel:
    if not isinstance(d, dict):
        raise ConfigError("system: expected a JSON object")
    kind = d.get("kind")
    if kind == "builtin":
        if "builtin" not in d:
            raise ConfigError("system.builtin: missing for kind 'builtin'")
        return builtin_system(d["builtin"], dt=d.get("dt", 0.1))
    if kind in ("periodic", "sequence"):
        A = _matrix_list(d, "A")
        B = _matrix_list(d, "B")
        ctor = SystemModel.periodic if kind == "periodic" else SystemModel.sequence
        system = ctor(A, B, partition=d.get("partition"))
        return system
    raise ConfigError(f"system.kind: expected 'periodic', 'sequence' or 'builtin', got {kind!r}")


def channel_from_dict(d) -> Optional[ChannelModel]:
    return None if d is None else ChannelModel.from_dict(d)


@dataclass
class RunConfig:
    """Everything a run depends on; echoed next to the outputs.

    Re-running with ``--config`` on the echoed file reproduces every output
    byte for byte.
    """

    command: str
    system: dict
    channel: Optional[dict] = None
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config: expected a JSON object")
        for key in ("command", "system"):
            if key not in d:
                raise ConfigError(f"config.{key}: missing")
        return cls(d["command"], d["system"], d.get("channel"), dict(d.get("params") or {}))


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (list, dict, str)):
        return _clean(obj.item())
    return obj


def dumps(obj) -> str:
    """Strict JSON (non-finite floats become null), 2-space indent, trailing LF."""
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"
