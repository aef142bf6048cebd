"""Flat TOML experiment configuration.

Every key maps to one field of :class:`ExperimentConfig`; unknown keys and
type mismatches are rejected with the offending field named. Empty arrays
select the experiment's built-in default grid.
"""

from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from starkloop.errors import ConfigError, DomainError
from starkloop.model import DissipationRates, OperatingPoint

EXPERIMENTS = ("phase_law", "response_map", "theta_sweep", "rmse_uniform",
               "rmse_nonuniform", "gain_curve", "validate")

_RATE_FIELDS = ("gamma21", "gamma32", "gamma42", "deph3", "deph4")
_OP_FIELDS = ("omega_p_rabi", "omega_c_rabi", "omega_s_rabi", "delta_p", "delta_c",
              "delta_s", "omega_s_drive", "theta")


@dataclass(frozen=True)
class ExperimentConfig:
    """All inputs of one experiment run.

    The operating-point fields mirror :class:`OperatingPoint` and
    :class:`DissipationRates`; ``omega_s_rabi`` doubles as the design level.
    """

    experiment: str = "validate"
    seed: int = 0
    n_max: int = 3
    out_dir: str = ""

    omega_p_rabi: float = 0.2
    omega_c_rabi: float = 1.0
    omega_s_rabi: float = 0.12
    delta_p: float = 0.0
    delta_c: float = 0.0
    delta_s: float = 0.0
    omega_s_drive: float = 10.0
    theta: float = 0.56
    gamma21: float = 1.0
    gamma32: float = 0.05
    gamma42: float = 0.05
    deph3: float = 0.01
    deph4: float = 0.01

    phi_points: int = 64
    omega_grid: list[float] = field(default_factory=list)
    theta_grid: list[float] = field(default_factory=list)
    snr_grid: list[float] = field(default_factory=list)
    rel_spreads: list[float] = field(default_factory=lambda: [0.01, 0.02, 0.05])
    gain_spreads: list[float] = field(default_factory=list)
    trials: int = 30_000
    detuning: str = "local"
    quadrature: str = "trapezoid"
    node_count: int = 201
    n_values: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5, 6, 7])
    n_ref: int = 8
    time_domain: bool = True
    td_burn_in_periods: int = 180
    td_eval_periods: int = 6
    td_samples_per_period: int = 400

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.type.startswith("list"):
                object.__setattr__(self, f.name, list(value))
        self._validate()

    def _validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError("experiment", f"unknown experiment {self.experiment!r}; "
                                            f"expected one of {EXPERIMENTS}")
        if self.seed < 0:
            raise ConfigError("seed", "must be >= 0")
        if not 1 <= self.n_max <= 32:
            raise ConfigError("n_max", "must lie in [1, 32]")
        if self.n_ref <= max(self.n_values, default=0) or self.n_ref > 32:
            raise ConfigError("n_ref", "must exceed every entry of n_values and be <= 32")
        if any(n < 1 for n in self.n_values):
            raise ConfigError("n_values", "entries must be >= 1")
        if self.phi_points < 2:
            raise ConfigError("phi_points", "must be >= 2")
        if self.trials < 1000:
            raise ConfigError("trials", "must be >= 1000")
        if self.detuning not in ("fixed", "local"):
            raise ConfigError("detuning", "must be 'fixed' or 'local'")
        if self.quadrature not in ("gauss-hermite", "trapezoid"):
            raise ConfigError("quadrature", "must be 'gauss-hermite' or 'trapezoid'")
        if self.node_count < 3:
            raise ConfigError("node_count", "must be >= 3")
        for name in ("omega_grid", "theta_grid"):
            grid = getattr(self, name)
            if grid and (len(grid) < (8 if name == "omega_grid" else 16)
                         or any(b <= a for a, b in zip(grid, grid[1:]))):
                raise ConfigError(name, "must be strictly increasing with enough points")
        if any(not math.isfinite(s) or s <= 0 for s in self.snr_grid):
            raise ConfigError("snr_grid", "entries must be finite and > 0")
        for name in ("rel_spreads", "gain_spreads"):
            if any(not math.isfinite(s) or s < 0 for s in getattr(self, name)):
                raise ConfigError(name, "entries must be finite and >= 0")
        for name in ("td_burn_in_periods", "td_eval_periods", "td_samples_per_period"):
            if getattr(self, name) < (0 if name == "td_burn_in_periods" else 1):
                raise ConfigError(name, "out of range")
        try:
            self.operating_point()
        except DomainError as exc:
            raise ConfigError("operating_point", str(exc)) from exc

    def operating_point(self) -> OperatingPoint:
        rates = DissipationRates(**{k: getattr(self, k) for k in _RATE_FIELDS})
        return OperatingPoint(**{k: getattr(self, k) for k in _OP_FIELDS}, rates=rates)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        fields = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, value in data.items():
            if key not in fields:
                raise ConfigError(key, "unknown configuration key")
            kwargs[key] = _coerce(key, fields[key].type, value)
        return cls(**kwargs)

    @classmethod
    def from_toml(cls, text: str) -> "ExperimentConfig":
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("<file>", f"invalid TOML: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError("<file>", f"cannot read {path}: {exc}") from exc
        return cls.from_toml(text)


def _coerce(key: str, type_name: str, value):
    scalar = {"str": str, "int": int, "float": float, "bool": bool}
    if type_name.startswith("list"):
        inner = type_name[len("list["):-1]
        if not isinstance(value, list):
            raise ConfigError(key, f"expected an array of {inner}")
        return [_coerce(f"{key}[{i}]", inner, v) for i, v in enumerate(value)]
    want = scalar[type_name]
    if want is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, want) or (want is int and isinstance(value, bool)):
        raise ConfigError(key, f"expected {type_name}, got {type(value).__name__}")
    return value
