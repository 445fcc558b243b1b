"""Closed-loop run records: one row per control tick plus plane snapshots.

The CSV schema is fixed and bit-deterministic for a given (scenario, seed):
wall-clock solver times are kept in memory for profiling but never written,
so identical runs produce identical files.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..geometry import Plane

TRACE_COLUMNS = [
    "tick",
    "t",
    "true_px", "true_py", "true_pz",
    "true_vx", "true_vy", "true_vz",
    "true_phi", "true_theta",
    "est_px", "est_py", "est_pz",
    "est_vx", "est_vy", "est_vz",
    "est_phi", "est_theta",
    "u_thrust", "u_phi_d", "u_theta_d",
    "w_px", "w_py", "w_pz", "w_vx", "w_vy", "w_vz", "w_phi", "w_theta",
    "ref_x", "ref_y", "ref_z",
    "ref_vx", "ref_vy", "ref_vz",
    "active_waypoint",
    "n_planes",
    "nmpc_cost",
    "nmpc_violation",
    "nmpc_rounds",
    "nmpc_iters",
    "nmpc_converged",
    "min_panel_dist",
    "min_cloud_dist",
]


@dataclass
class TickRecord:
    tick: int
    t: float
    true_state: np.ndarray
    est_state: np.ndarray
    u: np.ndarray
    weights: np.ndarray
    ref_position: np.ndarray
    ref_velocity: np.ndarray
    active_waypoint: int
    n_planes: int
    nmpc_cost: float
    nmpc_violation: float
    nmpc_rounds: int
    nmpc_iters: int
    nmpc_converged: bool
    min_panel_dist: float
    min_cloud_dist: float

    def as_row(self) -> list:
        vals = [
            self.tick,
            self.t,
            *self.true_state.tolist(),
            *self.est_state.tolist(),
            *self.u.tolist(),
            *self.weights.tolist(),
            *self.ref_position.tolist(),
            *self.ref_velocity.tolist(),
            self.active_waypoint,
            self.n_planes,
            self.nmpc_cost,
            self.nmpc_violation,
            self.nmpc_rounds,
            self.nmpc_iters,
            int(self.nmpc_converged),
            self.min_panel_dist,
            self.min_cloud_dist,
        ]
        return [repr(v) if isinstance(v, float) else str(v) for v in vals]


@dataclass
class RunTrace:
    scenario_name: str
    ts: float
    records: list[TickRecord] = field(default_factory=list)
    plane_snapshots: dict[int, list[Plane]] = field(default_factory=dict)
    solve_walltimes_s: list[float] = field(default_factory=list)
    segmentation_walltimes_s: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    @property
    def true_positions(self) -> np.ndarray:
        return np.array([r.true_state[:3] for r in self.records])

    @property
    def true_velocities(self) -> np.ndarray:
        return np.array([r.true_state[3:6] for r in self.records])

    @property
    def ref_positions(self) -> np.ndarray:
        return np.array([r.ref_position for r in self.records])

    @property
    def ref_velocities(self) -> np.ndarray:
        return np.array([r.ref_velocity for r in self.records])

    @property
    def min_panel_distances(self) -> np.ndarray:
        return np.array([r.min_panel_dist for r in self.records])

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            for rec in self.records:
                writer.writerow(rec.as_row())

    def write_plane_snapshots(self, path: str | Path) -> None:
        payload = {
            str(tick): [
                {
                    "alpha": float(p.alpha),
                    "beta": float(p.beta),
                    "gamma": float(p.gamma),
                    "zeta": float(p.zeta),
                }
                for p in planes
            ]
            for tick, planes in sorted(self.plane_snapshots.items())
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
