"""Synthetic spinning-lidar scan against panel geometry.

Stands in for the real 16-channel sensor: evenly spaced elevation rings over
+-15 degrees, fixed azimuth steps, nearest-panel hit per ray, Gaussian range
noise, output in the body frame of the scanning pose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..geometry import BODY_FRAME, PointCloud
from .environment import Environment


@dataclass
class LidarConfig:
    n_channels: int = 16
    vertical_fov_deg: float = 30.0  # total span, centered on the horizon
    horizontal_resolution_deg: float = 2.0
    max_range: float = 20.0
    range_noise_std: float = 0.01

    def __post_init__(self) -> None:
        if self.n_channels < 1:
            raise ValueError("need at least one channel")
        if self.horizontal_resolution_deg <= 0:
            raise ValueError("horizontal resolution must be positive")
        if self.max_range <= 0:
            raise ValueError("max range must be positive")
        if self.range_noise_std < 0:
            raise ValueError("range noise must be non-negative")


def body_rotation(phi: float, theta: float) -> np.ndarray:
    """World-from-body rotation at yaw zero: R = Ry(theta) @ Rx(phi).

    Chosen to match the thrust direction of the dynamics model:
    R @ e_z = (sin(theta) cos(phi), -sin(phi), cos(phi) cos(theta)).
    """
    sp, cp = math.sin(phi), math.cos(phi)
    st, ct = math.sin(theta), math.cos(theta)
    rx = np.array([[1, 0, 0], [0, cp, -sp], [0, sp, cp]])
    ry = np.array([[ct, 0, st], [0, 1, 0], [-st, 0, ct]])
    return ry @ rx


def ray_directions(config: LidarConfig) -> np.ndarray:
    """(M, 3) unit ray directions in the body frame, fixed scan pattern."""
    half = math.radians(config.vertical_fov_deg) / 2.0
    if config.n_channels == 1:
        elevations = np.array([0.0])
    else:
        elevations = np.linspace(-half, half, config.n_channels)
    n_az = int(round(360.0 / config.horizontal_resolution_deg))
    azimuths = np.arange(n_az) * math.radians(config.horizontal_resolution_deg)
    el, az = np.meshgrid(elevations, azimuths, indexing="ij")
    ce = np.cos(el)
    dirs = np.stack([ce * np.cos(az), ce * np.sin(az), np.sin(el)], axis=-1)
    return dirs.reshape(-1, 3)


def synthetic_scan(
    env: Environment,
    true_state: np.ndarray,
    config: LidarConfig,
    rng: np.random.Generator,
) -> PointCloud:
    """Cast the scan pattern from the true pose and return body-frame returns.

    Each ray keeps its nearest panel intersection within range; hit ranges are
    perturbed by zero-mean Gaussian noise along the ray.  Rays that miss every
    panel produce no point.
    """
    x = np.asarray(true_state, dtype=float).reshape(8)
    origin = x[:3]
    rot = body_rotation(x[6], x[7])
    dirs_body = ray_directions(config)
    dirs_world = dirs_body @ rot.T

    n_rays = dirs_world.shape[0]
    t_hit = np.full(n_rays, np.inf)
    for panel in env.panels:
        d_axis = dirs_world[:, panel.axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (panel.value - origin[panel.axis]) / d_axis
        valid = np.isfinite(t) & (t > 1e-9) & (t <= config.max_range)
        if not np.any(valid):
            continue
        a, b = panel.free_axes
        pa = origin[a] + t * dirs_world[:, a]
        pb = origin[b] + t * dirs_world[:, b]
        valid &= (pa >= panel.lo_a) & (pa <= panel.hi_a)
        valid &= (pb >= panel.lo_b) & (pb <= panel.hi_b)
        t_hit = np.where(valid & (t < t_hit), t, t_hit)

    hits = np.isfinite(t_hit)
    if not np.any(hits):
        return PointCloud(np.zeros((0, 3)), frame=BODY_FRAME)
    ranges = t_hit[hits]
    if config.range_noise_std > 0:
        ranges = ranges + rng.normal(0.0, config.range_noise_std, size=ranges.shape)
    points_body = dirs_body[hits] * ranges[:, None]
    return PointCloud(points_body, frame=BODY_FRAME)
