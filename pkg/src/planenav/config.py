"""Scenario files: YAML schema, validation, and conversion to runtime objects.

Every tunable consumed by any module is settable here; unknown keys are
rejected with the exact config path in the error message.  The same pydantic
models back the HTTP service, so file and API scenarios share one schema.
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .clustering import ClusteringConfig
from .dynamics import GRAVITY, ModelParams
from .nmpc import NmpcConfig
from .sim import (
    Environment,
    LidarConfig,
    NoiseConfig,
    Panel,
    PotentialFieldGains,
    ScenarioConfig,
    Waypoint,
    confined_room_environment,
    corridor_environment,
)


class ConfigError(ValueError):
    """Scenario file is unreadable or violates the schema."""


_MODE_ALIASES = {
    "adaptive": "adaptive",
    "fixed": "fixed",
    "fixed-weights": "fixed",
    "apf": "apf",
    "potential-field": "apf",
}


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class LidarSection(_Section):
    n_channels: int = 16
    vertical_fov_deg: float = 30.0
    horizontal_resolution_deg: float = 2.0
    max_range: float = 20.0
    range_noise_std: float = 0.01

    def to_runtime(self) -> LidarConfig:
        return LidarConfig(**self.model_dump())


class NoiseSection(_Section):
    position_std: float = 0.0
    velocity_std: float = 0.0
    activation_time_s: float = 0.0
    mode: Literal["known", "estimated"] = "known"
    estimator_window: int = 10
    innovation_floor: float = 0.05

    def to_runtime(self) -> NoiseConfig:
        return NoiseConfig(**self.model_dump())


class ModelSection(_Section):
    g: float = GRAVITY
    tau_phi: float = 0.5
    tau_theta: float = 0.5
    k_phi: float = 1.0
    k_theta: float = 1.0
    drag: tuple[float, float, float] = (0.1, 0.1, 0.1)

    def to_runtime(self, ts: float) -> ModelParams:
        return ModelParams(ts=ts, **self.model_dump())


class ClusteringSection(_Section):
    kappa1: float = 0.1
    kappa2: float = 0.2
    lam: float = Field(default=0.15, alias="lambda")
    n_cluster: int = 10
    rank: Optional[int] = None
    kmeans_restarts: int = 5
    kmeans_max_iters: int = 100
    lasso_tol: float = 1e-3
    lasso_max_iters: int = 2000
    plane_fit: Literal["tls", "three_point"] = "tls"
    merge_angle_deg: float = 1.0
    merge_offset_m: float = 0.05
    max_plane_rms_m: Optional[float] = 0.2
    min_inlier_fraction: float = 0.6
    min_cluster_fraction: float = 0.05
    min_plane_extent_m: float = 0.1
    refine_inlier_m: float = 0.05

    def to_runtime(self, seed: int = 0) -> ClusteringConfig:
        return ClusteringConfig(seed=seed, **self.model_dump())


class NmpcSection(_Section):
    horizon: int = 40
    ts: float = 0.05
    q_u: tuple[float, float, float] = (10.0, 10.0, 10.0)
    q_du: tuple[float, float, float] = (20.0, 20.0, 20.0)
    q_attitude: tuple[float, float] = (5.0, 5.0)
    u_min: tuple[float, float, float] = (0.0, -0.4, -0.4)
    u_max: tuple[float, float, float] = (2.0 * GRAVITY, 0.4, 0.4)
    d_s: float = 1.0
    dphi_max: float = 0.05
    dtheta_max: float = 0.05
    n_max: int = 10
    solver_tol: float = 1e-3
    solver_step_tol: float = 1e-5
    penalty_rounds_per_tick: int = 3
    penalty_init: float = 10.0
    penalty_factor: float = 5.0
    penalty_max: float = 1e6
    constraint_tol: float = 0.05
    max_inner_iters: int = 150
    lbfgs_memory: int = 10

    def to_runtime(self) -> NmpcConfig:
        return NmpcConfig(**self.model_dump())


class PotentialFieldSection(_Section):
    k_attract: float = 1.0
    k_repulse: float = 0.6
    k_damp: float = 1.6
    influence_radius: float = 1.0

    def to_runtime(self) -> PotentialFieldGains:
        return PotentialFieldGains(**self.model_dump())


class PanelSpec(_Section):
    axis: Literal["x", "y", "z"]
    value: float
    range_a: tuple[float, float]
    range_b: tuple[float, float]

    def to_runtime(self) -> Panel:
        return Panel(
            axis="xyz".index(self.axis),
            value=self.value,
            lo_a=self.range_a[0],
            hi_a=self.range_a[1],
            lo_b=self.range_b[0],
            hi_b=self.range_b[1],
        )


class EnvironmentSection(_Section):
    preset: Optional[Literal["corridor", "confined_room"]] = None
    # corridor preset knobs
    length: float = 20.0
    width: float = 2.0
    height: float = 3.0
    zigzag_amplitude: float = 0.55
    speed: float = 0.3
    # confined_room preset knobs
    size: tuple[float, float, float] = (4.0, 4.0, 3.0)
    floor_z: float = -0.5
    # explicit geometry (used when preset is omitted)
    panels: Optional[list[PanelSpec]] = None
    spawn: Optional[tuple[float, float, float]] = None

    def to_runtime(self, name: str) -> Environment:
        if self.preset == "corridor":
            return corridor_environment(
                length=self.length,
                width=self.width,
                height=self.height,
                zigzag_amplitude=self.zigzag_amplitude,
                speed=self.speed,
            )
        if self.preset == "confined_room":
            return confined_room_environment(size=self.size, floor_z=self.floor_z)
        if self.panels is None or self.spawn is None:
            raise ConfigError(
                "environment: either a preset or explicit panels + spawn is required"
            )
        return Environment(
            name=name,
            panels=[p.to_runtime() for p in self.panels],
            spawn=np.asarray(self.spawn, dtype=float),
            waypoints=[],
        )


class WaypointSpec(_Section):
    position: tuple[float, float, float]
    speed: float = 0.3


class ScenarioSpec(_Section):
    """Top-level scenario schema; one file fully determines a run."""

    name: str = "scenario"
    seed: int = 0
    mode: str = "adaptive"
    time_limit_s: float = 120.0
    segmentation_rate_hz: float = 10.0
    segmentation_range_m: float = 5.0
    environment: EnvironmentSection
    waypoints: Optional[list[WaypointSpec]] = None
    lidar: LidarSection = Field(default_factory=LidarSection)
    noise: NoiseSection = Field(default_factory=NoiseSection)
    model: ModelSection = Field(default_factory=ModelSection)
    clustering: ClusteringSection = Field(default_factory=ClusteringSection)
    nmpc: NmpcSection = Field(default_factory=NmpcSection)
    potential_field: PotentialFieldSection = Field(default_factory=PotentialFieldSection)

    @field_validator("mode")
    @classmethod
    def _canonical_mode(cls, v: str) -> str:
        if v not in _MODE_ALIASES:
            raise ValueError(f"mode must be one of {sorted(_MODE_ALIASES)}, got {v!r}")
        return _MODE_ALIASES[v]

    def to_runtime(self, seed: int | None = None, mode: str | None = None) -> ScenarioConfig:
        env = self.environment.to_runtime(self.name)
        if self.waypoints is not None:
            env.waypoints = [Waypoint(np.asarray(w.position, float), w.speed) for w in self.waypoints]
        run_seed = self.seed if seed is None else seed
        run_mode = self.mode if mode is None else _canonicalize_mode(mode)
        try:
            return ScenarioConfig(
                name=self.name,
                environment=env,
                lidar=self.lidar.to_runtime(),
                noise=self.noise.to_runtime(),
                model=self.model.to_runtime(ts=self.nmpc.ts),
                clustering=self.clustering.to_runtime(seed=run_seed),
                nmpc=self.nmpc.to_runtime(),
                potential_field=self.potential_field.to_runtime(),
                mode=run_mode,
                seed=run_seed,
                segmentation_rate_hz=self.segmentation_rate_hz,
                segmentation_range_m=self.segmentation_range_m,
                time_limit_s=self.time_limit_s,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def _canonicalize_mode(mode: str) -> str:
    if mode not in _MODE_ALIASES:
        raise ConfigError(f"mode must be one of {sorted(_MODE_ALIASES)}, got {mode!r}")
    return _MODE_ALIASES[mode]


def _format_validation_error(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"  {loc}: {err['msg']}")
    return "scenario config is invalid:\n" + "\n".join(lines)


def parse_scenario_dict(raw: dict) -> ScenarioSpec:
    if not isinstance(raw, dict):
        raise ConfigError("scenario config must be a mapping at the top level")
    try:
        return ScenarioSpec.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format_validation_error(exc)) from exc


def load_scenario(path: str | Path) -> ScenarioSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read scenario file {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path} is not valid YAML: {exc}") from exc
    return parse_scenario_dict(raw if raw is not None else {})


def load_clustering_config(path: str | Path, seed: int = 0) -> ClusteringConfig:
    """Clustering settings from a YAML file: either top-level keys or a
    ``clustering:`` section (so a full scenario file works too)."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise FileNotFoundError(f"cannot read config file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path} is not valid YAML: {exc}") from exc
    raw = raw or {}
    if "clustering" in raw and isinstance(raw["clustering"], dict):
        raw = raw["clustering"]
    try:
        section = ClusteringSection.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format_validation_error(exc)) from exc
    return section.to_runtime(seed=seed)
