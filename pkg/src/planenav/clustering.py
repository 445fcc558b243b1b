"""Scalable plane segmentation of a body-frame point cloud.

Pipeline: homogeneous embedding -> disjoint index sampling -> per-column
sparse self-representation (accelerated proximal gradient) -> implicit
similarity graph -> degree via scalar products -> spectral embedding through
the SVD of the small rescaled coefficient matrix -> k-means on the embedding
rows -> one plane fit per cluster.

The n2 x n2 similarity matrix is never materialized; every dense object is at
most n1 x n2 with n1 = floor(kappa1 * n) and n2 = floor(kappa2 * n).
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import (
    DegenerateGeometryError,
    EmptyCloudError,
    Plane,
    PointCloud,
    fit_plane_three_points,
    fit_plane_tls,
)

log = logging.getLogger(__name__)

# Degrees below this are treated as isolated points and floored before D^{-1/2}.
DEGREE_FLOOR = 1e-12


class ClusteringError(RuntimeError):
    """Base class for segmentation failures."""


class InsufficientPointsError(ClusteringError):
    """Too few points to sample a dictionary of at least three columns."""


class ConvergenceError(ClusteringError):
    """The sparse-representation solver did not reach the requested tolerance."""

    def __init__(self, residual: float, max_iters: int):
        super().__init__(
            f"lasso solver stopped at residual {residual:.3e} after {max_iters} iterations"
        )
        self.residual = residual
        self.max_iters = max_iters


class InvalidKError(ClusteringError):
    """Requested more clusters than there are samples."""


@dataclass
class ClusteringConfig:
    """Knobs for the segmentation pipeline.

    ``kappa1`` and ``kappa2`` are the dictionary / labeled sampling fractions
    with ``0 < kappa1 < kappa2 < 0.5``; ``lam`` weights the quadratic data-fit
    term against the l1 penalty; ``n_cluster`` is the number of clusters and
    ``rank`` (>= ``n_cluster``) the number of singular triplets retained.
    """

    kappa1: float = 0.1
    kappa2: float = 0.2
    lam: float = 0.15
    n_cluster: int = 10
    rank: int | None = None
    seed: int = 0
    kmeans_restarts: int = 5
    kmeans_max_iters: int = 100
    lasso_tol: float = 1e-3
    lasso_max_iters: int = 2000
    plane_fit: str = "tls"  # "tls" or "three_point"
    merge_angle_deg: float = 1.0
    merge_offset_m: float = 0.05
    max_plane_rms_m: float | None = 0.2
    min_inlier_fraction: float = 0.6
    min_cluster_fraction: float = 0.05
    min_plane_extent_m: float = 0.1
    refine_inlier_m: float = 0.05

    def __post_init__(self) -> None:
        if not (0.0 < self.kappa1 < self.kappa2 < 0.5):
            raise ValueError(
                f"sampling fractions must satisfy 0 < kappa1 < kappa2 < 0.5, "
                f"got kappa1={self.kappa1}, kappa2={self.kappa2}"
            )
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.n_cluster < 1:
            raise ValueError("n_cluster must be a positive integer")
        if self.rank is not None and self.rank < self.n_cluster:
            raise ValueError("rank must be >= n_cluster")
        for name in ("kmeans_restarts", "kmeans_max_iters", "lasso_max_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.lasso_tol <= 0:
            raise ValueError("lasso_tol must be positive")
        if self.plane_fit not in ("tls", "three_point"):
            raise ValueError(f"unknown plane_fit mode {self.plane_fit!r}")
        if not (0.0 < self.min_inlier_fraction <= 1.0):
            raise ValueError("min_inlier_fraction must be in (0, 1]")
        if not (0.0 <= self.min_cluster_fraction < 1.0):
            raise ValueError("min_cluster_fraction must be in [0, 1)")
        if self.min_plane_extent_m < 0:
            raise ValueError("min_plane_extent_m must be non-negative")
        if self.refine_inlier_m <= 0:
            raise ValueError("refine_inlier_m must be positive")

    @property
    def effective_rank(self) -> int:
        return self.n_cluster if self.rank is None else self.rank


@dataclass
class SegmentationResult:
    """Labels for the sampled points plus one plane per usable cluster.

    When planes were extracted, ``labels[i]`` indexes into ``planes`` for the
    i-th sampled point; with no usable plane the raw k-means labels are kept.
    """

    labels: np.ndarray
    planes: list[Plane]
    sampled_indices: np.ndarray
    warnings: list[str] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "labels": [int(v) for v in self.labels],
            "planes": [
                {
                    "alpha": float(p.alpha),
                    "beta": float(p.beta),
                    "gamma": float(p.gamma),
                    "zeta": float(p.zeta),
                }
                for p in self.planes
            ],
            "sampled_indices": [int(v) for v in self.sampled_indices],
        }


def homogeneous_embed(cloud: PointCloud) -> np.ndarray:
    """Stack points as columns and append the constant coordinate 1.

    Returns a 4 x n matrix; the extra row turns affine planes into linear
    subspaces of R^4, removing the sum-to-one constraint from the
    self-representation problem.
    """
    if len(cloud) == 0:
        raise EmptyCloudError("cannot embed an empty point cloud")
    n = len(cloud)
    out = np.ones((4, n))
    out[:3, :] = cloud.points.T
    return out


def sample_indices(n: int, config: ClusteringConfig, rng: np.random.Generator | None = None):
    """Draw disjoint dictionary / labeled index sets I1 and I2.

    ``|I1| = floor(kappa1*n)``, ``|I2| = floor(kappa2*n)``, both uniform
    without replacement and deterministic given the config seed.
    """
    n1 = int(math.floor(config.kappa1 * n))
    n2 = int(math.floor(config.kappa2 * n))
    if n1 < 3:
        raise InsufficientPointsError(
            f"{n} points give a dictionary of {n1} < 3 columns at kappa1={config.kappa1}"
        )
    if rng is None:
        rng = np.random.default_rng(config.seed)
    perm = rng.permutation(n)
    i1 = np.sort(perm[:n1])
    i2 = np.sort(perm[n1 : n1 + n2])
    return i1, i2


def _soft_threshold(x: np.ndarray, thresh: float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - thresh, 0.0)


def sparse_representation(
    B: np.ndarray,
    i1: np.ndarray,
    i2: np.ndarray,
    config: ClusteringConfig,
) -> np.ndarray:
    """Sparse code of each labeled column against the dictionary columns.

    For every j in I2 this solves

        min_c ||c||_1 + (lam / 2) * ||b_j - A c||_2^2,   A = B[:, I1],

    for all columns at once with an accelerated proximal-gradient iteration
    (per-column momentum with gradient-based restart).  The gradient step uses
    the exact Lipschitz constant lam * lambda_max(A A^T) -- a 4 x 4
    eigenproblem -- so no backtracking is needed.  A column is frozen once the
    norm of its proximal fixed-point residual ``x - T(x)`` drops below
    ``lasso_tol``; the error on non-convergence carries the worst residual.
    """
    A = np.ascontiguousarray(B[:, i1])
    Y = np.ascontiguousarray(B[:, i2])
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(Y))):
        raise ClusteringError("data matrix contains non-finite entries")
    n1 = A.shape[1]
    n2 = Y.shape[1]
    lam = config.lam

    gram_small = A @ A.T  # 4 x 4, shares nonzero spectrum with A^T A
    lipschitz = lam * float(np.linalg.eigvalsh(gram_small)[-1])
    if lipschitz <= 0:
        # All-zero dictionary: the solution is identically zero.
        return np.zeros((n1, n2))
    step = 1.0 / lipschitz

    C = np.zeros((n1, n2))
    active = np.arange(n2)
    X = np.zeros((n1, n2))
    Z = X.copy()
    t = np.ones(n2)
    AtY = A.T @ Y
    residual = np.inf
    check_every = 5

    for it in range(config.lasso_max_iters):
        grad_z = lam * (A.T @ (A @ Z) - AtY)
        X_new = _soft_threshold(Z - step * grad_z, step)
        # Per-column restart: drop momentum where it points uphill.
        restart = ((Z - X_new) * (X_new - X)).sum(axis=0) > 0.0
        t[restart] = 1.0
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        Z = X_new + ((t - 1.0) / t_new)[None, :] * (X_new - X)
        X, t = X_new, t_new

        if (it + 1) % check_every == 0 or it + 1 == config.lasso_max_iters:
            grad_x = lam * (A.T @ (A @ X) - AtY)
            fp = X - _soft_threshold(X - step * grad_x, step)
            norms = np.linalg.norm(fp, axis=0)
            done = norms <= config.lasso_tol
            if np.any(done):
                C[:, active[done]] = X[:, done]
                keep = ~done
                if not np.any(keep):
                    _log_column_density(C)
                    return C
                active = active[keep]
                X = np.ascontiguousarray(X[:, keep])
                Z = np.ascontiguousarray(Z[:, keep])
                t = t[keep]
                AtY = np.ascontiguousarray(AtY[:, keep])
            residual = float(norms.max())
    raise ConvergenceError(residual, config.lasso_max_iters)


def _log_column_density(C: np.ndarray) -> None:
    # Soft sanity check: on well-posed inputs sparse codes use at most half
    # the dictionary per column.  Logged, never asserted.
    density = float(np.mean((np.abs(C) > 1e-8).mean(axis=0)))
    if density > 0.5:
        log.debug("sparse codes are unusually dense: mean column density %.2f", density)


def degree_vector(C_abs: np.ndarray) -> np.ndarray:
    """Row sums of the implicit similarity matrix W = C~^T C~.

    Computed as ``d_i = c~_i . eta`` with ``eta = sum_j c~_j``, i.e. n2 scalar
    products instead of forming the n2 x n2 product.
    """
    if np.any(C_abs < 0):
        raise ValueError("degree_vector expects entrywise non-negative input")
    eta = C_abs.sum(axis=1)
    return C_abs.T @ eta


def spectral_embedding(
    C_abs: np.ndarray,
    degrees: np.ndarray,
    n_cluster: int,
    rank: int | None = None,
) -> np.ndarray:
    """Top right singular vectors of C~ D^{-1/2} as an n2 x K embedding.

    These equal the top eigenvectors of the (never formed) normalized
    similarity D^{-1/2} C~^T C~ D^{-1/2}.  The decomposition goes through the
    small n1 x n1 Gram matrix.  If the numerical rank falls short of
    ``n_cluster`` the available columns are returned and a warning is logged.
    """
    rank = n_cluster if rank is None else max(rank, n_cluster)
    d = np.maximum(np.asarray(degrees, dtype=float), DEGREE_FLOOR)
    M = C_abs / np.sqrt(d)[None, :]
    # Dense SVD of the small n1 x n2 matrix; right singular vectors drop out
    # directly, which is far more accurate for small singular values than
    # going through the n1 x n1 Gram matrix.
    _, sigma, vt = np.linalg.svd(M, full_matrices=False)
    sigma = sigma[:rank]
    vt = vt[:rank]
    keep = sigma > (sigma[0] * 1e-10 if sigma.size else 0.0)
    n_keep = int(np.count_nonzero(keep))
    if n_keep < n_cluster:
        log.warning(
            "spectral embedding is rank deficient: %d usable directions for %d clusters",
            n_keep,
            n_cluster,
        )
    return vt[keep][: min(n_cluster, n_keep)].T


def _kmeans_pp_init(rows: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = rows.shape[0]
    centers = np.empty((k, rows.shape[1]))
    first = int(rng.integers(n))
    centers[0] = rows[first]
    d2 = np.sum((rows - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[i] = rows[idx]
        d2 = np.minimum(d2, np.sum((rows - centers[i]) ** 2, axis=1))
    return centers


def kmeans_rows(
    V: np.ndarray,
    n_cluster: int,
    seed: int = 0,
    restarts: int = 5,
    max_iters: int = 100,
) -> np.ndarray:
    """Seeded k-means++ over the rows of V; best of ``restarts`` by WCSS."""
    rows = np.asarray(V, dtype=float)
    if rows.ndim == 1:
        rows = rows[:, None]
    n = rows.shape[0]
    if n_cluster > n:
        raise InvalidKError(f"cannot form {n_cluster} clusters from {n} rows")
    if not np.all(np.isfinite(rows)):
        raise ValueError("k-means input contains non-finite rows")
    if n_cluster == 1:
        return np.zeros(n, dtype=int)

    rng = np.random.default_rng(seed)
    best_labels = None
    best_wcss = np.inf
    for _ in range(restarts):
        centers = _kmeans_pp_init(rows, n_cluster, rng)
        labels = np.zeros(n, dtype=int)
        for _ in range(max_iters):
            dists = ((rows[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            labels = np.argmin(dists, axis=1)
            new_centers = centers.copy()
            for k in range(n_cluster):
                members = labels == k
                if np.any(members):
                    new_centers[k] = rows[members].mean(axis=0)
                else:
                    # Re-seed an empty cluster at the point farthest from its center.
                    far = int(np.argmax(dists[np.arange(n), labels]))
                    new_centers[k] = rows[far]
            shift = float(np.max(np.abs(new_centers - centers)))
            centers = new_centers
            if shift < 1e-12:
                break
        dists = ((rows[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(dists, axis=1)
        wcss = float(dists[np.arange(n), labels].sum())
        if wcss < best_wcss:
            best_wcss = wcss
            best_labels = labels
    return best_labels


def _trimmed_tls(pts: np.ndarray, rounds: int = 2) -> Plane:
    """TLS fit with MAD-based outlier rejection.

    Cluster contamination (points borrowed from another wall) sits far outside
    the residual scale of the true members, so one or two 3-sigma trims remove
    it and the refit recovers the clean normal.
    """
    plane = fit_plane_tls(pts)
    for _ in range(rounds):
        res = np.abs(pts @ plane.normal + plane.zeta)
        sigma = 1.4826 * float(np.median(res))
        keep = res <= max(3.0 * sigma, 1e-9)
        if int(keep.sum()) < max(3, int(0.3 * pts.shape[0])):
            break
        plane = fit_plane_tls(pts[keep])
    return plane


def _fit_cluster_plane(
    pts: np.ndarray, config: ClusteringConfig, rng: np.random.Generator
) -> Plane | None:
    if pts.shape[0] < 3:
        return None
    try:
        if config.plane_fit == "three_point":
            # The paper-style extraction: three randomly chosen cluster members.
            for _ in range(20):
                pick = rng.choice(pts.shape[0], size=3, replace=False)
                try:
                    plane = fit_plane_three_points(*pts[pick])
                    break
                except DegenerateGeometryError:
                    continue
            else:
                return None
        else:
            plane = _trimmed_tls(pts)
    except DegenerateGeometryError:
        return None
    # Judge the fit by its inliers: cluster contamination from other walls
    # sits beyond the 3-sigma band and says nothing about plane quality.  A
    # fit explaining less than min_inlier_fraction of its own cluster is a
    # trimming collapse (e.g. a coplanar slice through a corner wedge), not a
    # surface.
    res = np.abs(pts @ plane.normal + plane.zeta)
    sigma = 1.4826 * float(np.median(res))
    inliers = res <= max(3.0 * sigma, 1e-9)
    frac = float(inliers.mean())
    if frac < config.min_inlier_fraction:
        log.debug("rejecting cluster plane with inlier fraction %.2f", frac)
        return None
    if config.max_plane_rms_m is not None:
        rms = float(np.sqrt(np.mean(res[inliers] ** 2)))
        if rms > config.max_plane_rms_m:
            log.debug("rejecting cluster plane with inlier rms %.3f m", rms)
            return None
    if config.min_plane_extent_m > 0:
        # Coplanar scan bands (one lidar ring grazing a wall) are quasi-1D in
        # the plane; a real surface patch spreads in both in-plane directions.
        member = pts[inliers]
        centered = member - member.mean(axis=0)
        in_plane = centered - np.outer(centered @ plane.normal, plane.normal)
        eigvals = np.linalg.eigvalsh(in_plane.T @ in_plane / max(len(member), 1))
        minor_std = float(np.sqrt(max(eigvals[1], 0.0)))
        if minor_std < config.min_plane_extent_m:
            log.debug("rejecting band-like plane with minor extent %.3f m", minor_std)
            return None
    return plane


def _merge_duplicate_planes(
    planes: list[tuple[Plane, int]], angle_deg: float, offset_m: float
) -> tuple[list[Plane], dict[int, int]]:
    """Collapse near-duplicates (same wall found by several clusters).

    Returns the kept planes (largest backing cluster wins) and a map from the
    original candidate index to the index of its representative.
    """
    cos_tol = math.cos(math.radians(angle_deg))
    kept: list[tuple[Plane, int, int]] = []  # plane, size, original index
    remap: dict[int, int] = {}
    for orig_idx, (plane, size) in sorted(enumerate(planes), key=lambda t: -t[1][1]):
        merged = False
        for kept_pos, (other, _, _) in enumerate(kept):
            dot = float(plane.normal @ other.normal)
            if abs(dot) >= cos_tol:
                zeta_other = other.zeta if dot >= 0 else -other.zeta
                if abs(plane.zeta - zeta_other) <= offset_m:
                    remap[orig_idx] = kept_pos
                    merged = True
                    break
        if not merged:
            remap[orig_idx] = len(kept)
            kept.append((plane, size, orig_idx))
    return [p for p, _, _ in kept], remap


def segment_planes(cloud: PointCloud, config: ClusteringConfig) -> SegmentationResult:
    """Full segmentation pipeline: cloud in, cluster labels and planes out.

    Embed, sample, sparse-code, cluster spectrally, fit one plane per cluster,
    then refine labels by nearest-plane reassignment and merge duplicate
    planes.  Only the ``|I2|`` sampled points receive labels; planes are the
    product.  Deterministic given (cloud, config) including the seed.
    """
    if len(cloud) == 0:
        raise EmptyCloudError("cannot segment an empty point cloud")
    n = len(cloud)
    min_points = int(math.ceil(3.0 / config.kappa1))
    if n < min_points:
        raise InsufficientPointsError(
            f"segmentation needs >= {min_points} points at kappa1={config.kappa1}, got {n}"
        )

    seeds = np.random.SeedSequence(config.seed).spawn(3)
    rng_sample = np.random.default_rng(seeds[0])
    rng_pick = np.random.default_rng(seeds[2])

    B = homogeneous_embed(cloud)
    i1, i2 = sample_indices(n, config, rng=rng_sample)
    C = sparse_representation(B, i1, i2, config)
    C_abs = np.abs(C)
    degrees = degree_vector(C_abs)

    warnings: list[str] = []
    n_isolated = int(np.count_nonzero(degrees <= DEGREE_FLOOR))
    if n_isolated:
        warnings.append(f"{n_isolated} sampled points are isolated (degree floored)")

    V = spectral_embedding(C_abs, degrees, config.n_cluster, config.effective_rank)
    if V.shape[1] == 0:
        warnings.append("zero-rank similarity; all points assigned to one cluster")
        labels = np.zeros(len(i2), dtype=int)
    else:
        if V.shape[1] < config.n_cluster:
            warnings.append(
                f"rank-deficient embedding: {V.shape[1]} directions for {config.n_cluster} clusters"
            )
        # Unit rows sharpen the angular cluster structure before k-means.
        V = V / np.maximum(np.linalg.norm(V, axis=1, keepdims=True), 1e-12)
        kmeans_seed = int(seeds[1].generate_state(1)[0])
        labels = kmeans_rows(
            V,
            config.n_cluster,
            seed=kmeans_seed,
            restarts=config.kmeans_restarts,
            max_iters=config.kmeans_max_iters,
        )

    sampled_pts = cloud.points[i2]
    min_support = max(3, int(math.ceil(config.min_cluster_fraction * len(i2))))

    candidates: list[Plane] = []
    for k in range(config.n_cluster):
        member_pts = sampled_pts[labels == k]
        if member_pts.shape[0] < min_support:
            continue
        plane = _fit_cluster_plane(member_pts, config, rng_pick)
        if plane is not None:
            candidates.append(plane)

    if not candidates:
        warnings.append("no cluster produced a usable plane")
        return SegmentationResult(
            labels=np.asarray(labels, dtype=int),
            planes=[],
            sampled_indices=i2,
            warnings=warnings,
        )

    # Consolidation by greedy coverage: candidates compete for the sampled
    # points they explain (within refine_inlier_m).  A clean full-wall fit
    # claims the whole wall; a tilted or duplicated variant of the same wall
    # is left with too little unclaimed support and drops out.  Claimed
    # groups are refit, which fixes normals that k-means banding skewed.
    distances = np.column_stack(
        [np.abs(sampled_pts @ p.normal + p.zeta) for p in candidates]
    )
    unclaimed = np.ones(len(i2), dtype=bool)
    consolidated: list[tuple[Plane, int]] = []
    within = distances <= config.refine_inlier_m
    for _ in range(len(candidates)):
        counts = (within & unclaimed[:, None]).sum(axis=0)
        best = int(np.argmax(counts))
        if counts[best] < min_support:
            break
        claim = within[:, best] & unclaimed
        refit = _fit_cluster_plane(sampled_pts[claim], config, rng_pick)
        plane = refit if refit is not None else candidates[best]
        consolidated.append((plane, int(claim.sum())))
        unclaimed &= ~claim
        within[:, best] = False

    if not consolidated:
        consolidated = [(candidates[0], int(len(i2)))]

    planes, _ = _merge_duplicate_planes(
        consolidated, config.merge_angle_deg, config.merge_offset_m
    )
    normals = np.array([p.normal for p in planes])
    zetas = np.array([p.zeta for p in planes])
    labels = np.argmin(np.abs(sampled_pts @ normals.T + zetas), axis=1)

    return SegmentationResult(
        labels=labels,
        planes=planes,
        sampled_indices=i2,
        warnings=warnings,
    )


def clustering_accuracy(labels_true: Sequence[int], labels_pred: Sequence[int]) -> float:
    """Fraction of points labeled correctly under the best cluster-ID matching.

    Invariant to permutation of cluster IDs (optimal assignment on the
    confusion matrix).
    """
    lt = np.asarray(labels_true, dtype=int)
    lp = np.asarray(labels_pred, dtype=int)
    if lt.shape != lp.shape:
        raise ValueError("label arrays must have equal length")
    k = int(max(lt.max(), lp.max())) + 1
    confusion = np.zeros((k, k), dtype=int)
    for a, b in zip(lt, lp):
        confusion[a, b] += 1
    rows, cols = linear_sum_assignment(-confusion)
    return float(confusion[rows, cols].sum()) / float(lt.size)
