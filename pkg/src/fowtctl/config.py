"""Toolkit configuration: one nested YAML file, every section optional.

Example::

    turbine:   {rated_wind: 11.4}
    platform:  {inertia: 2.5e10, damping: 1.6e9}
    controller: {m_beta: 0.5, pid_bandwidth: 1.0}
    study:     {speeds: [12, 13, 14], seeds: 6, master_seed: 2024}

Unknown keys are rejected so typos do not silently fall back to defaults.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

import yaml

from .controller import FilterCorners
from .fowt_model import ActuatorParams, PlatformParams
from .rotor_aero import PerformanceSurface, RotorGeometry, SurrogateParams, build_surrogate_surface, load_surface
from .simulation import SimConfig

ENV_VAR = "FOWTCTL_CONFIG"

VARIANTS = ("Baseline", "Detune", "Detune-Sched", "Comp-beta", "Comp-tau", "Comp-Dual",
            "Detune+Comp", "Detune+Comp+Ptfm")
# accepted spellings for the two single-actuator compensation variants
VARIANT_ALIASES = {"Comp-β": "Comp-beta", "Comp-τg": "Comp-tau", "Comp-taug": "Comp-tau"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SurfaceConfig:
    path: str | None = None
    surrogate: SurrogateParams = field(default_factory=SurrogateParams)

    def build(self) -> PerformanceSurface:
        if self.path:
            return load_surface(self.path)
        return build_surrogate_surface(self.surrogate)


@dataclass(frozen=True)
class ControllerSettings:
    corners: FilterCorners = field(default_factory=FilterCorners)
    dt_ctrl: float = 0.02
    tau_g_max_ratio: float = 1.2
    phi_dot_max: float = 0.0175
    m_beta: float = 0.5
    region2_band: float = 0.02
    pid_bandwidth: float = 1.0
    pid_zeta: float = 0.7
    ballast_settle_time: float = 600.0
    ballast_mode: str = "static"
    tuning_spacing: float = 0.5


@dataclass(frozen=True)
class WindSettings:
    i_ref: float = 0.14
    dt: float = 0.05
    length_scale: float = 340.2


@dataclass(frozen=True)
class StudyConfig:
    speeds: tuple = tuple(float(v) for v in range(12, 25))
    seeds: int = 6
    variants: tuple = VARIANTS
    master_seed: int = 2024
    out: str = "study_out"
    workers: int = 1
    batch_size: int = 40
    reference_speed: float = 12.0
    normalization: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "speeds", tuple(float(v) for v in self.speeds))
        object.__setattr__(self, "variants", tuple(canonical_variant(v) for v in self.variants))
        if not self.speeds:
            raise ConfigError("study needs at least one wind speed")
        if self.seeds < 1:
            raise ConfigError("study needs at least one seed")
        if not self.variants:
            raise ConfigError("study needs at least one variant")
        if len(set(self.variants)) != len(self.variants):
            raise ConfigError("duplicate variant names")
        if self.workers < 1 or self.batch_size < 1:
            raise ConfigError("workers and batch_size must be positive")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigError("master seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class ToolkitConfig:
    turbine: RotorGeometry = field(default_factory=RotorGeometry)
    platform: PlatformParams = field(default_factory=PlatformParams)
    actuators: ActuatorParams = field(default_factory=ActuatorParams)
    surface: SurfaceConfig = field(default_factory=SurfaceConfig)
    controller: ControllerSettings = field(default_factory=ControllerSettings)
    wind: WindSettings = field(default_factory=WindSettings)
    simulation: SimConfig = field(default_factory=SimConfig)
    study: StudyConfig = field(default_factory=StudyConfig)
    tower_share: float = 0.5


def canonical_variant(name) -> str:
    name = VARIANT_ALIASES.get(str(name).strip(), str(name).strip())
    if name not in VARIANTS:
        raise ConfigError(f"unknown controller variant {name!r}; choose from {', '.join(VARIANTS)}")
    return name


def _build(cls, data, where):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"section {where!r} must be a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where!r}: {', '.join(sorted(unknown))}")
    kwargs = {}
    defaults = cls()
    for key, value in data.items():
        current = getattr(defaults, key)
        if is_dataclass(current):
            kwargs[key] = _build(type(current), value, f"{where}.{key}")
        elif isinstance(current, tuple) and isinstance(value, list):
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where!r}: {exc}") from exc


def from_dict(data) -> ToolkitConfig:
    return _build(ToolkitConfig, data or {}, "config")


def load(path=None) -> ToolkitConfig:
    """Read ``path``, or the file named by $FOWTCTL_CONFIG, or fall back to defaults."""
    if path is None:
        path = os.environ.get(ENV_VAR)
    if not path:
        return ToolkitConfig()
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {p} does not exist")
    return from_dict(yaml.safe_load(p.read_text()))


def to_dict(cfg: ToolkitConfig) -> dict:
    def clean(x):
        if isinstance(x, dict):
            return {k: clean(v) for k, v in x.items()}
        if isinstance(x, (tuple, list)):
            return [clean(v) for v in x]
        return x
    return clean(asdict(cfg))


def dump(cfg: ToolkitConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)
