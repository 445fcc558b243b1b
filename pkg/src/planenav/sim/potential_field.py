"""Artificial potential field baseline controller.

Attraction toward the active reference point plus inverse-square repulsion
from cloud points inside the influence radius, mapped to thrust and attitude
commands through the small-angle inversion of the translational dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dynamics import ModelParams
from .lidar import body_rotation


@dataclass
class PotentialFieldGains:
    k_attract: float = 1.0
    k_repulse: float = 0.6
    k_damp: float = 1.6
    influence_radius: float = 1.0  # matches the safety distance by default

    def __post_init__(self) -> None:
        if self.influence_radius <= 0:
            raise ValueError("influence radius must be positive")


def potential_field_step(
    x_est: np.ndarray,
    cloud_body: np.ndarray,
    ref_position: np.ndarray,
    gains: PotentialFieldGains,
    params: ModelParams,
    u_min,
    u_max,
) -> np.ndarray:
    """One control tick of the baseline: returns (thrust, phi_d, theta_d)."""
    x = np.asarray(x_est, dtype=float).reshape(8)
    accel = gains.k_attract * (np.asarray(ref_position, float) - x[:3]) - gains.k_damp * x[3:6]

    pts = np.asarray(cloud_body, dtype=float).reshape(-1, 3)
    if pts.shape[0]:
        dist = np.linalg.norm(pts, axis=1)
        near = (dist < gains.influence_radius) & (dist > 1e-6)
        if np.any(near):
            d = np.clip(dist[near], 0.05, None)
            # Inverse-square falloff, pushing away from each near point.
            rep_body = -(pts[near] / d[:, None]) * (gains.k_repulse / (d * d))[:, None]
            rep_body = rep_body.mean(axis=0) * min(near.sum(), 50)
            accel += body_rotation(x[6], x[7]) @ rep_body

    # Small-angle inversion: ax ~ g*theta, ay ~ -g*phi, az ~ T - g.
    thrust = params.g + accel[2]
    theta_d = accel[0] / params.g
    phi_d = -accel[1] / params.g
    u = np.array([thrust, phi_d, theta_d])
    return np.clip(u, np.asarray(u_min, float), np.asarray(u_max, float))
