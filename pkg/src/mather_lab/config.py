"""Experiment configuration: one JSON document, individual keys overridable."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path

import numpy as np

from .lagrangian import LagrangianModel, Potential, preset_potential
from .mather_functions import BetaConfig
from .slope_lattice import RationalSlope, parse_slope

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "worker_count", "WORKERS_ENV"]

WORKERS_ENV = "AMLAB_WORKERS"


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration (exit code 2)."""


def _fraction(value) -> Fraction:
    try:
        return Fraction(str(value))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"invalid rational {value!r}") from None


@dataclass
class ExperimentConfig:
    seed: int
    n: int = 1
    Q: list | None = None
    delta: float | None = None
    potential: object = "pendulum"
    eps: float = 0.1
    slope: str | None = None
    cap: int = 8
    range: list = field(default_factory=lambda: ["-1", "1"])
    c_box: list = field(default_factory=lambda: [-1.0, 1.0])
    c_num: int = 401
    N: int = 256
    tol: float = 1e-9
    random_starts: int = 12
    table_random_starts: int = 2
    max_shifts: int = 8
    resolution: str = "basis"
    K: int = 8
    out: str = "out"
    eps_ladder: list = field(default_factory=lambda: [0.0, 0.05, 0.1, 0.2])
    sample_slopes: list = field(default_factory=lambda: ["0"])
    beta_table: str | None = None
    field_a: str | None = None
    field_b: str | None = None
    samples: int = 8

    def __post_init__(self):
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        for key in ("n", "cap", "c_num", "N", "K", "samples", "max_shifts"):
            v = getattr(self, key)
            if not isinstance(v, int) or v < 1:
                raise ConfigError(f"{key} must be a positive integer, got {v!r}")
        for key in ("random_starts", "table_random_starts"):
            v = getattr(self, key)
            if not isinstance(v, int) or v < 0:
                raise ConfigError(f"{key} must be a non-negative integer, got {v!r}")
        if self.N < 2:
            raise ConfigError("N must be >= 2")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.resolution not in ("basis", "unit"):
            raise ConfigError("resolution must be 'basis' or 'unit'")
        if len(self.range) != 2 or _fraction(self.range[0]) > _fraction(self.range[1]):
            raise ConfigError(f"empty slope range {self.range!r}")
        if len(self.c_box) != 2 or float(self.c_box[0]) > float(self.c_box[1]):
            raise ConfigError(f"empty c-box {self.c_box!r}")

    def slope_range(self) -> tuple[Fraction, Fraction]:
        return _fraction(self.range[0]), _fraction(self.range[1])

    def rho(self) -> RationalSlope:
        if self.slope is None:
            raise ConfigError("a slope is required (key 'slope')")
        try:
            rho = parse_slope(str(self.slope))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if rho.n != self.n:
            raise ConfigError(f"slope {self.slope!r} has {rho.n} components, model has n={self.n}")
        return rho

    def parsed_slopes(self, key: str = "sample_slopes") -> list[RationalSlope]:
        out = []
        for tok in getattr(self, key):
            try:
                rho = parse_slope(str(tok))
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
            if rho.n != self.n:
                raise ConfigError(f"slope {tok!r} does not have {self.n} components")
            out.append(rho)
        return out

    def potential_obj(self) -> Potential:
        try:
            if isinstance(self.potential, str):
                return preset_potential(self.potential, self.n)
            return Potential.from_entries(self.n, self.potential)
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"invalid potential: {exc}") from None

    def model(self, eps: float | None = None) -> LagrangianModel:
        Q = np.eye(self.n) if self.Q is None else np.array(self.Q, dtype=float)
        try:
            return LagrangianModel(Q, self.potential_obj(), self.eps if eps is None else eps,
                                   delta=self.delta)
        except ValueError as exc:
            raise ConfigError(f"invalid model: {exc}") from None

    def beta_config(self) -> BetaConfig:
        return BetaConfig(N=self.N, tol=self.tol, random_starts=self.table_random_starts,
                          max_shifts=self.max_shifts, seed=self.seed, resolution=self.resolution)

    def out_dir(self) -> Path:
        p = Path(self.out)
        p.mkdir(parents=True, exist_ok=True)
        return p

    def to_dict(self) -> dict:
        return asdict(self)


def _coerce(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def load_config(path: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Read a JSON config and apply ``overrides`` (already typed or raw strings)."""
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    if "seed" not in data:
        raise ConfigError("seed is mandatory (config key 'seed' or --seed)")
    try:
        return ExperimentConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def parse_override(item: str) -> tuple[str, object]:
    if "=" not in item:
        raise ConfigError(f"override {item!r} must look like key=value")
    key, raw = item.split("=", 1)
    return key.strip(), _coerce(raw)


def worker_count(flag: int | None = None) -> int:
    if flag is not None:
        return max(1, int(flag))
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None

