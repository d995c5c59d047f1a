"""Flat ``key = value`` experiment configuration with typed parsing."""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, fields, replace
from pathlib import Path

from ..compression import CompressionParams
from ..estimator import AUTO_J, FIXED_J, SOLVER_GRADE, STANDARD, EstimatorConfig
from ..fields import FOURIER_MULTIPLIER, SCHRODINGER_POWER, GRFSpec, OperatorSpec

RATE = "rate-sweep"
SPARSITY = "sparsity-sweep"
NOISELESS = "noiseless-sweep"
SOLVER = "solver-sweep"
OVB = "ovb-probe"
SWEEP_MODES = (RATE, SPARSITY, NOISELESS, SOLVER, OVB)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = RATE
    # estimator and mask parameters
    t: float = 1.0
    tp: float = 1.0
    r: float = -2.0
    r1: float = 1.5
    r2: float = 1.5
    sigma: float = 2.25
    d: int = 2
    dt: int = 4
    a: float = 2.0
    jitter: float = 1e-10
    estimator_mode: str = AUTO_J
    J: int | None = None
    support: str = STANDARD
    eps: float = 0.25
    # ground truth
    operator: str = SCHRODINGER_POWER
    kappa: float = 1.0
    potential: str = "1+0.5*cos"
    # data
    input_shift: float = 1.0
    noise: bool = True
    noise_shift: float = 1.0
    bandlimit: bool = False
    # grids
    N_grid: tuple[int, ...] = (64, 128, 256, 512, 1024, 2048, 4096)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    J_grid: tuple[int, ...] = (4, 5, 6, 7, 8)
    alpha_grid: tuple[float, ...] = (0.0,)
    Jref: int | None = None
    grid_level: int | None = None
    timing: bool = False
    out: str = "results"

    def __post_init__(self):
        problems = []
        if self.mode not in SWEEP_MODES:
            problems.append(f"mode must be one of {', '.join(SWEEP_MODES)}")
        if self.estimator_mode not in (AUTO_J, FIXED_J):
            problems.append("estimator_mode must be auto-J or fixed-J")
        if self.support not in (STANDARD, SOLVER_GRADE):
            problems.append("support must be standard or solver-grade")
        if self.operator not in (FOURIER_MULTIPLIER, SCHRODINGER_POWER):
            problems.append("operator must be FourierMultiplier or SchrodingerPower")
        if self.mode in (RATE, OVB, NOISELESS) and not self.N_grid:
            problems.append("N_grid is empty")
        if any(b <= a for a, b in zip(self.N_grid, self.N_grid[1:])):
            problems.append("N_grid must be strictly increasing")
        if any(n < 2 for n in self.N_grid):
            problems.append("N_grid entries must be >= 2")
        if self.mode == RATE and len(self.seeds) < 3:
            problems.append("rate-sweep needs at least 3 seeds")
        if not self.seeds:
            problems.append("seeds is empty")
        if self.mode in (SPARSITY, SOLVER, NOISELESS) and not self.J_grid:
            problems.append("J_grid is empty")
        if problems:
            raise ConfigError("; ".join(problems))
        try:
            self.estimator()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def estimator(self, **overrides):
        keys = {f.name for f in fields(EstimatorConfig)}
        values = {k: getattr(self, k) for k in keys if k not in ("mode", "n")}
        values["mode"] = self.estimator_mode
        values.update(overrides)
        return EstimatorConfig(**values)

    def compression(self, J):
        return CompressionParams(J=J, t=self.t, tp=self.tp, r=self.r, sigma=self.sigma, dt=self.dt, a=self.a, d=self.d)

    def operator_spec(self):
        return OperatorSpec(kind=self.operator, order=self.r, kappa=self.kappa, potential=self.potential)

    def input_spec(self):
        return GRFSpec(order=self.r1, shift=self.input_shift)

    def noise_spec(self):
        return GRFSpec(order=self.r2, shift=self.noise_shift) if self.noise else None


_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _convert(kind, text, key):
    origin = typing.get_origin(kind)
    args = typing.get_args(kind)
    if origin is tuple:
        inner = args[0]
        parts = [p.strip() for p in text.split(",") if p.strip()]
        return tuple(_convert(inner, p, key) for p in parts)
    if type(None) in args:
        if text.lower() in ("none", ""):
            return None
        kind = next(a for a in args if a is not type(None))
    if kind is bool:
        low = text.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ConfigError(f"{key}: expected a boolean, got {text!r}")
    if kind is int:
        try:
            value = float(text)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {text!r}") from None
        if value != int(value):
            raise ConfigError(f"{key}: expected an integer, got {text!r}")
        return int(value)
    if kind is float:
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {text!r}") from None
    return text


def _field_types():
    return typing.get_type_hints(ExperimentConfig)


def parse_pairs(pairs: dict[str, str], base: ExperimentConfig | None = None):
    """Build a config from raw string values, rejecting unknown keys."""
    types = _field_types()
    unknown = sorted(set(pairs) - set(types))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    values = {k: _convert(types[k], v, k) for k, v in pairs.items()}
    try:
        return replace(base, **values) if base is not None else ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def parse_text(text: str):
    pairs = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {n}: expected key = value")
        key = key.strip()
        if key in pairs:
            raise ConfigError(f"line {n}: duplicate key {key!r}")
        pairs[key] = value.strip()
    return pairs


def load_config(path, overrides: dict[str, str] | None = None):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    pairs = parse_text(text)
    pairs.update(overrides or {})
    return parse_pairs(pairs)


def format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(format_value(v) for v in value)
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: ExperimentConfig):
    return "".join(f"{f.name} = {format_value(getattr(cfg, f.name))}\n" for f in dataclasses.fields(cfg))
