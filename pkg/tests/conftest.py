"""Shared synthetic-scene generators used as ground-truth oracles."""

import numpy as np
import pytest

from planenav.geometry import PointCloud


def make_wall_cloud(rng, n_per_wall, noise_std=0.01, extent=4.0):
    """Points drawn evenly from three mutually orthogonal walls.

    Walls: z = 0, y = 0, x = 0 patches of side ``extent``, each perturbed
    along its normal by N(0, noise_std^2).  Returns (cloud, labels, normals)
    where labels/normals are the generating ground truth.
    """
    points = []
    labels = []
    normals = np.eye(3)[[2, 1, 0]]  # z=0, y=0, x=0 wall normals
    for wall in range(3):
        a = rng.uniform(0.0, extent, size=n_per_wall)
        b = rng.uniform(0.0, extent, size=n_per_wall)
        off = rng.normal(0.0, noise_std, size=n_per_wall) if noise_std > 0 else np.zeros(n_per_wall)
        if wall == 0:
            pts = np.column_stack([a, b, off])
        elif wall == 1:
            pts = np.column_stack([a, off, b])
        else:
            pts = np.column_stack([off, a, b])
        points.append(pts)
        labels.append(np.full(n_per_wall, wall))
    order = rng.permutation(3 * n_per_wall)
    cloud = PointCloud(np.vstack(points)[order], frame="body")
    return cloud, np.concatenate(labels)[order], normals


@pytest.fixture
def wall_cloud_factory():
    return make_wall_cloud
