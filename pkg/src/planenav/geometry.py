"""Shared geometric primitives: 3D points, point clouds, and plane equations.

Everything downstream (segmentation, control, simulation) speaks in terms of
these types.  Clouds are ordered arrays of points in meters; planes are the
coefficients of ``alpha*x + beta*y + gamma*z + zeta = 0`` and are stored with a
unit normal so coefficient comparisons and tolerances are well defined.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class GeometryError(ValueError):
    """Base class for geometric errors."""


class InvalidPlaneError(GeometryError):
    """Plane has a (numerically) zero normal."""


class DegenerateGeometryError(GeometryError):
    """Input points do not determine a plane (collinear / coincident / too few)."""


class EmptyCloudError(GeometryError):
    """A non-empty point cloud was required."""


# Cross-product norm below this means "collinear" for a 3-point fit.
COLLINEAR_TOL = 1e-9

BODY_FRAME = "body"
WORLD_FRAME = "world"


@dataclass(frozen=True)
class Point3:
    """A single 3D point in meters (body frame unless stated otherwise)."""

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise GeometryError(f"non-finite point coordinates: {(self.x, self.y, self.z)}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


def _as_point_array(p) -> np.ndarray:
    if isinstance(p, Point3):
        return p.as_array()
    a = np.asarray(p, dtype=float).reshape(3)
    return a


@dataclass
class PointCloud:
    """Ordered set of 3D points with a coordinate-frame tag."""

    points: np.ndarray
    frame: str = BODY_FRAME

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise GeometryError(f"point cloud must be (n, 3), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise GeometryError("point cloud contains non-finite coordinates")
        if self.frame not in (BODY_FRAME, WORLD_FRAME):
            raise GeometryError(f"unknown frame tag {self.frame!r}")
        self.points = pts

    def __len__(self) -> int:
        return self.points.shape[0]

    @classmethod
    def from_points(cls, points: Iterable, frame: str = BODY_FRAME) -> "PointCloud":
        rows = [_as_point_array(p) for p in points]
        arr = np.array(rows, dtype=float) if rows else np.zeros((0, 3))
        return cls(arr, frame=frame)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "z"])
            for row in self.points:
                writer.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path: str | Path, frame: str = BODY_FRAME) -> "PointCloud":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["x", "y", "z"]:
                raise GeometryError(f"{path}: expected CSV header 'x,y,z'")
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 3:
                    raise GeometryError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
                try:
                    rows.append([float(v) for v in row])
                except ValueError as exc:
                    raise GeometryError(f"{path}:{lineno}: {exc}") from exc
        return cls(np.array(rows, dtype=float) if rows else np.zeros((0, 3)), frame=frame)


@dataclass(frozen=True)
class Plane:
    """Plane ``alpha*x + beta*y + gamma*z + zeta = 0`` stored with unit normal.

    Construction normalizes the coefficients, so ``alpha**2 + beta**2 +
    gamma**2 == 1`` holds for every live instance.  A zero normal raises
    :class:`InvalidPlaneError`.
    """

    alpha: float
    beta: float
    gamma: float
    zeta: float

    def __post_init__(self) -> None:
        coeffs = (self.alpha, self.beta, self.gamma, self.zeta)
        if not all(math.isfinite(v) for v in coeffs):
            raise InvalidPlaneError(f"non-finite plane coefficients: {coeffs}")
        norm = math.sqrt(self.alpha**2 + self.beta**2 + self.gamma**2)
        if norm < 1e-15:
            raise InvalidPlaneError("plane normal is zero")
        # Skip the division for already-normalized input so normalization is
        # idempotent (keeps serialized planes bit-stable across round trips).
        if abs(norm - 1.0) > 1e-12:
            object.__setattr__(self, "alpha", self.alpha / norm)
            object.__setattr__(self, "beta", self.beta / norm)
            object.__setattr__(self, "gamma", self.gamma / norm)
            object.__setattr__(self, "zeta", self.zeta / norm)

    @property
    def normal(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.gamma], dtype=float)

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.gamma, self.zeta], dtype=float)

    def distance(self, point) -> float:
        return point_plane_distance(self, point)


def _plane_coefficients(plane) -> np.ndarray:
    if isinstance(plane, Plane):
        return plane.as_array()
    arr = np.asarray(plane, dtype=float).reshape(4)
    return arr


def point_plane_distance(plane, point) -> float:
    """Unsigned point-to-plane distance in meters.

    ``plane`` may be a :class:`Plane` or any 4-sequence of raw (possibly
    unnormalized) coefficients; the distance is invariant under positive
    scaling of the coefficients.
    """
    coeffs = _plane_coefficients(plane)
    p = _as_point_array(point)
    norm = math.sqrt(coeffs[0] ** 2 + coeffs[1] ** 2 + coeffs[2] ** 2)
    if norm < 1e-15:
        raise InvalidPlaneError("plane normal is zero")
    return abs(coeffs[0] * p[0] + coeffs[1] * p[1] + coeffs[2] * p[2] + coeffs[3]) / norm


def _canonical_sign(normal: np.ndarray, zeta: float) -> tuple[np.ndarray, float]:
    # Flip so the largest-magnitude normal component is positive; makes the
    # two fitting routes return identical coefficients for identical planes.
    idx = int(np.argmax(np.abs(normal)))
    if normal[idx] < 0:
        return -normal, -zeta
    return normal, zeta


def fit_plane_three_points(p1, p2, p3) -> Plane:
    """Exact plane through three non-collinear points."""
    a, b, c = _as_point_array(p1), _as_point_array(p2), _as_point_array(p3)
    n = np.cross(b - a, c - a)
    norm = float(np.linalg.norm(n))
    if norm <= COLLINEAR_TOL:
        raise DegenerateGeometryError("three points are collinear or coincident")
    n = n / norm
    n, zeta = _canonical_sign(n, -float(n @ a))
    return Plane(n[0], n[1], n[2], zeta)


def fit_plane_tls(points) -> Plane:
    """Total-least-squares plane through a cluster of points.

    The normal is the smallest-eigenvalue eigenvector of the centered scatter
    matrix; the offset places the plane through the centroid.  Requires at
    least three points that are not all collinear.
    """
    if isinstance(points, PointCloud):
        pts = points.points
    else:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if pts.shape[0] < 3:
        raise DegenerateGeometryError(f"need >= 3 points for a plane fit, got {pts.shape[0]}")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    scatter = centered.T @ centered
    eigvals, eigvecs = np.linalg.eigh(scatter)
    # Rank < 2 in the tangent directions means the points sit on a line.
    if eigvals[1] <= 1e-12 * max(eigvals[2], 1e-30):
        raise DegenerateGeometryError("points are (numerically) collinear; plane is underdetermined")
    normal = eigvecs[:, 0]
    normal, zeta = _canonical_sign(normal, -float(normal @ centroid))
    return Plane(normal[0], normal[1], normal[2], zeta)


def planes_to_csv(planes: Sequence[Plane], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alpha", "beta", "gamma", "zeta"])
        for pl in planes:
            writer.writerow([repr(float(v)) for v in pl.as_array()])


def planes_from_csv(path: str | Path) -> list[Plane]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["alpha", "beta", "gamma", "zeta"]:
            raise GeometryError(f"{path}: expected CSV header 'alpha,beta,gamma,zeta'")
        planes = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise GeometryError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
            try:
                planes.append(Plane(*(float(v) for v in row)))
            except ValueError as exc:
                raise GeometryError(f"{path}:{lineno}: {exc}") from exc
    return planes
