"""Run metrics: tracking error, path length, obstacle clearance, collision."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .environment import Environment
from .trace import RunTrace

COLLISION_DISTANCE = 0.05


@dataclass
class Metrics:
    waypoint_mae: float
    velocity_mae: float
    path_length: float
    min_obstacle_distance: float
    collision: bool

    def to_json_dict(self) -> dict:
        # Strict JSON has no Infinity; an obstacle-free world reports null.
        min_dist = self.min_obstacle_distance
        return {
            "waypoint_mae_m": self.waypoint_mae,
            "velocity_mae_mps": self.velocity_mae,
            "path_length_m": self.path_length,
            "min_obstacle_distance_m": min_dist if np.isfinite(min_dist) else None,
            "collision": self.collision,
        }

    def write_json(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def compute_metrics(trace: RunTrace, env: Environment) -> Metrics:
    if len(trace) == 0:
        raise ValueError("cannot compute metrics for an empty trace")
    pos = trace.true_positions
    vel = trace.true_velocities
    waypoint_mae = float(np.mean(np.linalg.norm(pos - trace.ref_positions, axis=1)))
    velocity_mae = float(np.mean(np.linalg.norm(vel - trace.ref_velocities, axis=1)))
    path_length = float(np.sum(np.linalg.norm(np.diff(pos, axis=0), axis=1)))
    min_dist = float(np.min(trace.min_panel_distances)) if env.panels else float("inf")
    return Metrics(
        waypoint_mae=waypoint_mae,
        velocity_mae=velocity_mae,
        path_length=path_length,
        min_obstacle_distance=min_dist,
        collision=bool(min_dist < COLLISION_DISTANCE),
    )
