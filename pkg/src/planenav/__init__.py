"""Plane-segmentation-driven NMPC navigation stack for a small quadrotor."""

from .clustering import (
    ClusteringConfig,
    ClusteringError,
    ConvergenceError,
    InsufficientPointsError,
    SegmentationResult,
    clustering_accuracy,
    segment_planes,
)
from .dynamics import ControlInput, MavState, ModelParams
from .geometry import (
    DegenerateGeometryError,
    GeometryError,
    InvalidPlaneError,
    Plane,
    Point3,
    PointCloud,
    fit_plane_three_points,
    fit_plane_tls,
    point_plane_distance,
)
from .nmpc import (
    AdaptiveWeights,
    ControllerState,
    NmpcConfig,
    NmpcSolution,
    VarianceWindow,
    control_step,
    entropy_weights,
    shannon_entropy,
)

__version__ = "0.1.0"

__all__ = [
    "AdaptiveWeights",
    "ClusteringConfig",
    "ClusteringError",
    "ControlInput",
    "ControllerState",
    "ConvergenceError",
    "DegenerateGeometryError",
    "GeometryError",
    "InsufficientPointsError",
    "InvalidPlaneError",
    "MavState",
    "ModelParams",
    "NmpcConfig",
    "NmpcSolution",
    "Plane",
    "Point3",
    "PointCloud",
    "SegmentationResult",
    "VarianceWindow",
    "clustering_accuracy",
    "control_step",
    "entropy_weights",
    "fit_plane_three_points",
    "fit_plane_tls",
    "point_plane_distance",
    "segment_planes",
    "shannon_entropy",
]
