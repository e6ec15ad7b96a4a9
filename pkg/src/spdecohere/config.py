"""Experiment and sweep configuration files.

The format is line oriented, ``section.key = value``, with ``#`` comments.
Lengths carry a unit suffix (``nm``, ``um``/``µm``, ``mm``, ``m``) and are
stored in micrometres; angles take ``rad`` or ``deg`` (bare numbers are
radians). Since ``c = 1``, times are lengths too, so ``tau_z`` and ``T_z``
come out in micrometres as well. Unknown keys are errors.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from .decoherence import E2_PRESETS
from .errors import ConfigError, SpdecohereError
from .profiles import BeamConfig, GratingGeometry, profile_from_grating
from .quadrature import QuadratureSpec

__all__ = [
    "ExperimentConfig",
    "SweepSpec",
    "parse_length",
    "parse_angle",
    "load_config",
    "load_sweep",
    "parse_config_text",
    "parse_sweep_text",
    "SWEEP_PARAMS",
]

_LENGTH_UNITS = {"nm": 1e-3, "um": 1.0, "µm": 1.0, "μm": 1.0, "mm": 1e3, "m": 1e6}
_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_QTY = re.compile(rf"^\s*({_NUM})\s*([^\s\d.+-][^\s]*)?\s*$")

SWEEP_PARAMS = ("R_over_tau", "Tz_over_tau", "N", "theta", "v_y")


def _quantity(text: str) -> Tuple[float, Optional[str]]:
    m = _QTY.match(text)
    if not m:
        raise ConfigError(f"cannot parse quantity {text!r}")
    return float(m.group(1)), m.group(2)


def parse_length(text: str) -> float:
    """Length in micrometres; a unit suffix is mandatory."""
    value, unit = _quantity(text)
    if unit is None:
        raise ConfigError(f"length {text!r} needs a unit (nm, um, mm, m)")
    if unit not in _LENGTH_UNITS:
        raise ConfigError(f"unknown length unit {unit!r} in {text!r}")
    return value * _LENGTH_UNITS[unit]


def parse_angle(text: str) -> float:
    value, unit = _quantity(text)
    if unit in (None, "rad"):
        return value
    if unit == "deg":
        return math.radians(value)
    raise ConfigError(f"unknown angle unit {unit!r} in {text!r}")


def _parse_float(text: str) -> float:
    value, unit = _quantity(text)
    if unit is not None:
        raise ConfigError(f"{text!r} must be a plain number")
    return value


def _parse_int(text: str) -> int:
    value = _parse_float(text)
    if value != int(value):
        raise ConfigError(f"{text!r} must be an integer")
    return int(value)


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"{text!r} is not a boolean")


def _parse_epsilons(text: str) -> Tuple[int, ...]:
    out = []
    for part in text.split(","):
        e = _parse_int(part)
        if e not in (-1, 0, 1):
            raise ConfigError(f"epsilon must be -1, 0 or +1, got {e}")
        if e not in out:
            out.append(e)
    if not out:
        raise ConfigError("empty epsilon list")
    return tuple(sorted(out))


def _read_pairs(text: str, source: str) -> Dict[str, str]:
    pairs: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if "." not in key or not value:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value'")
        if key in pairs:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one computation; lengths in micrometres."""

    n_grooves: int
    d: float
    xi: float
    theta: float
    v_y: float
    R: float
    z0: float
    epsilon: int
    e2: float
    e2_preset: Optional[str] = None
    w_plane: float = 0.0
    mode: str = "approximate"
    attenuate: bool = False
    proximity_threshold: float = 0.2
    rel_tol: float = 1e-8
    abs_tol: float = 0.0
    max_subdivisions: int = 60
    omega_max: Optional[float] = None
    near_pole_exclusion_halfwidth: float = 1e-6
    mc_samples: int = 1_000_000
    seed: int = 0
    json_out: Optional[str] = None
    csv_out: Optional[str] = None

    def __post_init__(self):
        if self.mode == "approx":
            object.__setattr__(self, "mode", "approximate")
        if self.mode not in ("approximate", "full"):
            raise ConfigError(f"model.mode must be 'approximate' or 'full', got {self.mode!r}")
        if self.e2_preset is not None and self.e2_preset not in E2_PRESETS:
            raise ConfigError(f"unknown e2 preset {self.e2_preset!r}")
        if not self.w_plane >= 0:
            raise ConfigError("model.w_plane must be >= 0")
        if self.mc_samples < 10_000:
            raise ConfigError("mc.samples must be >= 10000")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("mc.seed must be an unsigned 64-bit integer")
        try:
            self.grating
            self.beam
            self.quad
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                profile_from_grating(self.grating, self.beam, self.proximity_threshold)
        except SpdecohereError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @property
    def grating(self) -> GratingGeometry:
        return GratingGeometry(self.n_grooves, self.d, self.xi, self.theta)

    @property
    def beam(self) -> BeamConfig:
        return BeamConfig(self.v_y, self.R, self.z0, self.epsilon, self.e2)

    @property
    def quad(self) -> QuadratureSpec:
        return QuadratureSpec(
            rel_tol=self.rel_tol,
            abs_tol=self.abs_tol,
            max_subdivisions=self.max_subdivisions,
            omega_max=self.omega_max,
            near_pole_exclusion_halfwidth=self.near_pole_exclusion_halfwidth,
        )

    @property
    def tau_z(self) -> float:
        return self.xi / (self.v_y * math.tan(self.theta)) if self.theta > 0 else 0.5 * self.T_z

    @property
    def T_z(self) -> float:
        return self.d / self.v_y

    def with_overrides(self, **changes) -> "ExperimentConfig":
        if "e2_preset" in changes and changes["e2_preset"] is not None:
            changes["e2"] = E2_PRESETS[changes["e2_preset"]]
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)


# key -> (field, parser)
_CONFIG_KEYS = {
    "grating.n_grooves": ("n_grooves", _parse_int),
    "grating.d": ("d", parse_length),
    "grating.xi": ("xi", parse_length),
    "grating.theta": ("theta", parse_angle),
    "grating.tan_theta": ("tan_theta", _parse_float),
    "beam.v_y": ("v_y", _parse_float),
    "beam.R": ("R", parse_length),
    "beam.z0": ("z0", parse_length),
    "beam.epsilon": ("epsilon", _parse_int),
    "beam.e2": ("e2", _parse_float),
    "beam.e2_preset": ("e2_preset", str),
    "model.w_plane": ("w_plane", _parse_float),
    "model.mode": ("mode", str),
    "model.attenuate": ("attenuate", _parse_bool),
    "model.proximity_threshold": ("proximity_threshold", _parse_float),
    "quadrature.rel_tol": ("rel_tol", _parse_float),
    "quadrature.abs_tol": ("abs_tol", _parse_float),
    "quadrature.max_subdivisions": ("max_subdivisions", _parse_int),
    "quadrature.omega_max": ("omega_max", _parse_float),
    "quadrature.near_pole_exclusion_halfwidth": ("near_pole_exclusion_halfwidth", _parse_float),
    "mc.samples": ("mc_samples", _parse_int),
    "mc.seed": ("seed", _parse_int),
    "output.json": ("json_out", str),
    "output.csv": ("csv_out", str),
}

_REQUIRED = ("n_grooves", "d", "xi", "v_y", "R", "z0", "epsilon")


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse config text; ``quadrature.omega_max`` is an angular frequency in 1/µm."""
    pairs = _read_pairs(text, source)
    values = {}
    for key, raw in pairs.items():
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{source}: unknown key {key!r}")
        name, parser = _CONFIG_KEYS[key]
        try:
            values[name] = parser(raw)
        except ValueError as exc:
            raise ConfigError(f"{source}: {key}: {exc}") from exc
    missing = [k for k in _REQUIRED if k not in values]
    if missing:
        raise ConfigError(f"{source}: missing keys {missing}")
    if ("theta" in values) == ("tan_theta" in values):
        raise ConfigError(f"{source}: give exactly one of grating.theta and grating.tan_theta")
    if "tan_theta" in values:
        tt = values.pop("tan_theta")
        if not tt >= 0:
            raise ConfigError(f"{source}: grating.tan_theta must be >= 0")
        values["theta"] = math.atan(tt)
    preset = values.get("e2_preset")
    if ("e2" in values) == (preset is not None):
        raise ConfigError(f"{source}: give exactly one of beam.e2 and beam.e2_preset")
    if preset is not None:
        if preset not in E2_PRESETS:
            raise ConfigError(f"{source}: unknown e2 preset {preset!r} (use {sorted(E2_PRESETS)})")
        values["e2"] = E2_PRESETS[preset]
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, str(path))


@dataclass(frozen=True)
class SweepSpec:
    """One swept parameter over a linear or logarithmic grid."""

    param: str
    min: float
    max: float
    count: int
    scale: str = "linear"
    epsilons: Tuple[int, ...] = (-1, 0, 1)

    def __post_init__(self):
        if self.param not in SWEEP_PARAMS:
            raise ConfigError(f"sweep.param must be one of {SWEEP_PARAMS}, got {self.param!r}")
        if self.count < 2:
            raise ConfigError("sweep.count must be >= 2")
        if not self.min < self.max:
            raise ConfigError("sweep.min must be < sweep.max")
        if self.scale not in ("linear", "log"):
            raise ConfigError("sweep.scale must be 'linear' or 'log'")
        if self.scale == "log" and not self.min > 0:
            raise ConfigError("a log grid needs sweep.min > 0")
        if not self.epsilons or any(e not in (-1, 0, 1) for e in self.epsilons):
            raise ConfigError("sweep.epsilons must be a subset of {-1, 0, 1}")

    def grid(self) -> np.ndarray:
        if self.scale == "log":
            g = np.geomspace(self.min, self.max, self.count)
        else:
            g = np.linspace(self.min, self.max, self.count)
        if self.param == "N":
            g = np.round(g)
        return g

    def to_dict(self) -> dict:
        d = asdict(self)
        d["epsilons"] = list(self.epsilons)
        return d


def parse_sweep_text(text: str, source: str = "<sweep>") -> SweepSpec:
    pairs = _read_pairs(text, source)
    allowed = {"sweep.param", "sweep.min", "sweep.max", "sweep.count", "sweep.scale", "sweep.epsilons"}
    unknown = set(pairs) - allowed
    if unknown:
        raise ConfigError(f"{source}: unknown keys {sorted(unknown)}")
    for k in ("sweep.param", "sweep.min", "sweep.max", "sweep.count"):
        if k not in pairs:
            raise ConfigError(f"{source}: missing key {k!r}")
    param = pairs["sweep.param"]
    bound = parse_angle if param == "theta" else _parse_float
    try:
        return SweepSpec(
            param=param,
            min=bound(pairs["sweep.min"]),
            max=bound(pairs["sweep.max"]),
            count=_parse_int(pairs["sweep.count"]),
            scale=pairs.get("sweep.scale", "linear"),
            epsilons=_parse_epsilons(pairs.get("sweep.epsilons", "-1,0,1")),
        )
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_sweep(path) -> SweepSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read sweep {path}: {exc}") from exc
    return parse_sweep_text(text, str(path))
