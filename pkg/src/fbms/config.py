"""Run configuration: a JSON document whose fields command-line flags override."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError
from .mesh import BUILTIN_NAMES

FORMS = ("area", "energy", "tangential", "robin", "all")


@dataclass
class RunConfig:
    builtin: Optional[str] = "flat_disk"
    mesh: Optional[str] = None
    format: Optional[str] = None
    resolution: int = 16
    refine: int = 0
    ambient: str = "unit_ball"
    form: str = "area"
    k: int = 20
    tol_zero: Optional[float] = None
    tol_min: float = 5e-2
    tol_orth: float = 2e-2
    t_grid: tuple = (1e-3, 1e2, 32)
    c1: Optional[float] = None
    c2: Optional[float] = None
    c: Optional[float] = None
    seed: int = 0
    samples: int = 100
    max_dofs: int = 600
    out: Optional[str] = None
    csv: Optional[str] = None
    json: bool = False

    # fields that do not change results and are left out of the hash
    OUTPUT_FIELDS = ("out", "csv", "json")

    def validate(self) -> "RunConfig":
        if self.mesh is None and self.builtin is None:
            raise ConfigError("give --builtin NAME or --mesh PATH")
        if self.mesh is None and self.builtin not in BUILTIN_NAMES:
            raise ConfigError(f"unknown builtin {self.builtin!r}; choose from {BUILTIN_NAMES}")
        if self.format is not None and self.format.lower() not in ("off", "obj"):
            raise ConfigError("format must be off or obj")
        if int(self.resolution) < 1:
            raise ConfigError("resolution must be >= 1")
        if int(self.refine) < 0:
            raise ConfigError("refine must be >= 0")
        if self.form not in FORMS:
            raise ConfigError(f"form must be one of {FORMS}")
        if int(self.k) < 1:
            raise ConfigError("k must be >= 1")
        for name in ("tol_min", "tol_orth"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.tol_zero is not None and not self.tol_zero > 0:
            raise ConfigError("tol_zero must be positive")
        for name in ("c1", "c2", "c"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive")
        lo, hi, n = self.t_grid
        if not (0 < lo < hi) or int(n) < 1:
            raise ConfigError("t grid must satisfy 0 < lo < hi with count >= 1")
        if int(self.samples) < 1:
            raise ConfigError("samples must be >= 1")
        return self

    def hashable(self) -> dict:
        d = dataclasses.asdict(self)
        for k in self.OUTPUT_FIELDS:
            d.pop(k, None)
        d["t_grid"] = list(d["t_grid"])
        return d

    @classmethod
    def from_json(cls, path: str) -> "RunConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if "t_grid" in data:
            data["t_grid"] = tuple(data["t_grid"])
        return cls(**data)


def parse_t_grid(text: str) -> tuple:
    try:
        lo, hi, n = text.split(",")
        return float(lo), float(hi), int(n)
    except ValueError as exc:
        raise ConfigError("--t-grid expects lo,hi,count") from exc
