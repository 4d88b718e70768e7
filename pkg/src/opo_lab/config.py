"""JSON run configuration for the command-line tools."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from .errors import ConfigError, OpoLabError
from .noise import PhaseNoiseParams
from .opo import OpoParams

# A sweep is either an explicit list or {"start": a, "stop": b, "num": n} (endpoints included).
Sweep = Union[list, dict]


@dataclass(frozen=True)
class RunConfig:
    alpha: float = 2.0
    sigma: float = math.pi / 4
    theta: float = 0.0
    d: float = 0.4
    eta_in: float = 0.01
    eta_esc: float = 0.93
    nodes: int = 201
    grid: int = 2048
    samples: int = 1_000_000
    seed: int = 20240607
    bins: int = 64
    batches: int = 2000
    batch_size: int = 10_000
    output_path: Optional[str] = None
    # sweeps used by the individual subcommands
    phi_in_values: Sweep = field(default_factory=lambda: {"start": -3.141592653589793,
                                                           "stop": 3.141592653589793, "num": 65})
    d_values: Sweep = field(default_factory=lambda: [0.0, 0.4])
    alpha_values: Sweep = field(default_factory=lambda: [0.5, 1.0, 2.0, 3.0])
    sigma_values: Sweep = field(default_factory=lambda: [0.1, 0.39269908169872414, 0.7853981633974483])
    map_grid: int = 256
    map_d_values: Sweep = field(default_factory=lambda: [0.2, 0.4, 0.6])
    alpha_range: list = field(default_factory=lambda: [0.1, 5.0])
    sigma_range: list = field(default_factory=lambda: [0.0, 1.2])
    r_values: Sweep = field(default_factory=lambda: {"start": 0.05, "stop": 2.0, "num": 40})
    scan_r_values: Sweep = field(default_factory=lambda: [0.05, 1.0])
    scan_points: int = 256
    n_values: Sweep = field(default_factory=lambda: [20.0, 50.0, 100.0, 200.0])

    def __post_init__(self):
        try:
            self.opo()
            PhaseNoiseParams(self.sigma)
        except OpoLabError as exc:
            raise ConfigError(str(exc)) from exc
        if self.alpha <= 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if self.nodes < 1 or self.nodes % 2 == 0 or self.nodes > 512:
            raise ConfigError(f"nodes must be odd and in [1, 511], got {self.nodes}")
        for name in ("grid", "map_grid", "samples", "batches", "batch_size", "scan_points"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.bins < 8:
            raise ConfigError("bins must be at least 8")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        for name in ("alpha_range", "sigma_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ConfigError(f"{name} must be an increasing pair")
        for f in dataclasses.fields(self):
            if f.name.endswith("_values"):
                self.values(f.name)

    def opo(self, d: Optional[float] = None) -> OpoParams:
        return OpoParams(self.d if d is None else d, self.eta_in, self.eta_esc)

    def values(self, name: str) -> np.ndarray:
        spec = getattr(self, name)
        if isinstance(spec, dict):
            if set(spec) != {"start", "stop", "num"}:
                raise ConfigError(f"{name}: a range needs exactly start, stop and num")
            xs = np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))
        elif isinstance(spec, list):
            xs = np.array(spec, dtype=float)
        else:
            raise ConfigError(f"{name} must be a list or a range object")
        if xs.size == 0:
            raise ConfigError(f"{name} is empty")
        return xs

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return dataclasses.replace(self, **kw) if kw else self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


_INT_FIELDS = {f.name for f in dataclasses.fields(RunConfig) if f.type in ("int",)}


def from_dict(data: dict[str, Any]) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    for k in _INT_FIELDS & set(data):
        if not isinstance(data[k], int) or isinstance(data[k], bool):
            raise ConfigError(f"{k} must be an integer")
    try:
        return RunConfig(**data)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load(path: Union[str, Path, None]) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    return from_dict(data)
