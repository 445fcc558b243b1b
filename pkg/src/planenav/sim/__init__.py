"""Closed-loop simulation harness: environments, sensors, noise, execution."""

from .environment import Environment, Panel, Waypoint, confined_room_environment, corridor_environment
from .lidar import LidarConfig, body_rotation, ray_directions, synthetic_scan
from .metrics import COLLISION_DISTANCE, Metrics, compute_metrics
from .noise import NoiseConfig, OdometryNoise, inject_noise
from .potential_field import PotentialFieldGains, potential_field_step
from .reference import ReferenceTrack
from .scenario import (
    MODE_ADAPTIVE,
    MODE_APF,
    MODE_FIXED,
    MODES,
    ScenarioConfig,
    execute_scenario,
    run_scenario,
)
from .trace import TRACE_COLUMNS, RunTrace, TickRecord

__all__ = [
    "COLLISION_DISTANCE",
    "Environment",
    "LidarConfig",
    "MODES",
    "MODE_ADAPTIVE",
    "MODE_APF",
    "MODE_FIXED",
    "Metrics",
    "NoiseConfig",
    "OdometryNoise",
    "Panel",
    "PotentialFieldGains",
    "ReferenceTrack",
    "RunTrace",
    "ScenarioConfig",
    "TRACE_COLUMNS",
    "TickRecord",
    "Waypoint",
    "body_rotation",
    "compute_metrics",
    "confined_room_environment",
    "corridor_environment",
    "execute_scenario",
    "inject_noise",
    "potential_field_step",
    "ray_directions",
    "run_scenario",
    "synthetic_scan",
]
