import math

import numpy as np
import pytest

from planenav.geometry import (
    DegenerateGeometryError,
    GeometryError,
    InvalidPlaneError,
    Plane,
    Point3,
    PointCloud,
    fit_plane_three_points,
    fit_plane_tls,
    planes_from_csv,
    planes_to_csv,
    point_plane_distance,
)


def plane_angle_deg(p: Plane, normal) -> float:
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    return math.degrees(math.acos(min(1.0, abs(float(p.normal @ n)))))


# ---------------------------------------------------------------- distances


def test_distance_axis_aligned():
    assert point_plane_distance(Plane(0, 0, 1, 0), (0, 0, 2)) == pytest.approx(2.0)


def test_distance_point_on_plane():
    assert point_plane_distance(Plane(0, 0, 1, 0), (5, -3, 0)) == pytest.approx(0.0)


def test_distance_unnormalized_coefficients():
    # Raw coefficient sequence, not normalized: |0 + 0 + 0 - 1| / sqrt(2).
    assert point_plane_distance((1.0, 1.0, 0.0, -1.0), (0, 0, 0)) == pytest.approx(
        1.0 / math.sqrt(2.0)
    )


def test_distance_scale_invariance():
    rng = np.random.default_rng(7)
    for _ in range(50):
        coeffs = rng.normal(size=4)
        if np.linalg.norm(coeffs[:3]) < 1e-6:
            continue
        point = rng.normal(size=3) * 5
        base = point_plane_distance(coeffs, point)
        for c in (1e-3, 0.5, 7.0, 1e4):
            assert point_plane_distance(c * coeffs, point) == pytest.approx(base, rel=1e-12)


def test_distance_nonnegative_and_zero_iff_on_plane():
    rng = np.random.default_rng(8)
    for _ in range(50):
        plane = Plane(*rng.normal(size=4))
        p = rng.normal(size=3) * 3
        d = point_plane_distance(plane, p)
        assert d >= 0.0
        # Project the point onto the plane: distance must vanish there.
        signed = float(plane.normal @ p) + plane.zeta
        on_plane = p - signed * plane.normal
        assert point_plane_distance(plane, on_plane) < 1e-12


def test_distance_degenerate_plane_raises():
    with pytest.raises(InvalidPlaneError):
        point_plane_distance((0.0, 0.0, 0.0, 1.0), (1, 2, 3))


def test_plane_constructor_normalizes_and_rejects_zero_normal():
    p = Plane(0, 0, 10, -10)
    assert p.as_array() == pytest.approx([0, 0, 1, -1])
    with pytest.raises(InvalidPlaneError):
        Plane(0, 0, 0, 1)


# ---------------------------------------------------------------- 3-point fit


def test_fit_three_points_xy_plane():
    p = fit_plane_three_points((0, 0, 0), (1, 0, 0), (0, 1, 0))
    assert abs(p.gamma) == pytest.approx(1.0)
    assert p.zeta == pytest.approx(0.0, abs=1e-15)


def test_fit_three_points_diagonal_plane():
    p = fit_plane_three_points((1, 0, 0), (0, 1, 0), (0, 0, 1))
    s = 1.0 / math.sqrt(3.0)
    assert p.as_array() == pytest.approx([s, s, s, -s])


def test_fit_three_points_collinear_raises():
    with pytest.raises(DegenerateGeometryError):
        fit_plane_three_points((0, 0, 0), (1, 0, 0), (2, 0, 0))


def test_fit_three_points_contains_inputs():
    rng = np.random.default_rng(3)
    for _ in range(30):
        pts = rng.normal(size=(3, 3)) * 4
        try:
            plane = fit_plane_three_points(*pts)
        except DegenerateGeometryError:
            continue
        for p in pts:
            assert point_plane_distance(plane, p) <= 1e-9


# ---------------------------------------------------------------- TLS fit


def test_tls_exact_horizontal_plane():
    rng = np.random.default_rng(11)
    pts = np.column_stack([rng.uniform(-3, 3, 100), rng.uniform(-3, 3, 100), np.ones(100)])
    plane = fit_plane_tls(pts)
    assert abs(plane.gamma) == pytest.approx(1.0)
    assert point_plane_distance(plane, (0, 0, 1)) < 1e-12
    residuals = [point_plane_distance(plane, p) for p in pts]
    assert max(residuals) < 1e-12


def test_tls_three_points_matches_exact_fit():
    pts = [(0.3, -1.2, 0.4), (1.4, 0.7, -0.2), (-0.5, 0.9, 1.1)]
    assert fit_plane_tls(pts).as_array() == pytest.approx(
        fit_plane_three_points(*pts).as_array(), abs=1e-12
    )


def test_tls_recovers_noisy_diagonal_plane():
    # Oracle: the synthetic generator for x + y = 2 with normal noise.
    rng = np.random.default_rng(5)
    n = 500
    t = rng.uniform(-4, 4, n)
    z = rng.uniform(-2, 2, n)
    base = np.column_stack([1.0 + t / math.sqrt(2), 1.0 - t / math.sqrt(2), z])
    true_normal = np.array([1.0, 1.0, 0.0]) / math.sqrt(2.0)
    noisy = base + rng.normal(0, 0.01, n)[:, None] * true_normal
    plane = fit_plane_tls(noisy)
    assert plane_angle_deg(plane, true_normal) < 1.0


def test_tls_collinear_raises():
    pts = np.column_stack([np.linspace(0, 5, 40), np.zeros(40), np.zeros(40)])
    with pytest.raises(DegenerateGeometryError):
        fit_plane_tls(pts)
    with pytest.raises(DegenerateGeometryError):
        fit_plane_tls([(0, 0, 0), (1, 1, 1)])


# ---------------------------------------------------------------- types, csv


def test_point3_rejects_non_finite():
    with pytest.raises(GeometryError):
        Point3(0.0, float("nan"), 1.0)


def test_cloud_shape_and_nan_validation():
    with pytest.raises(GeometryError):
        PointCloud(np.zeros((4, 2)))
    with pytest.raises(GeometryError):
        PointCloud(np.array([[0.0, 0.0, float("inf")]]))


def test_cloud_csv_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    cloud = PointCloud(rng.normal(size=(25, 3)), frame="body")
    path = tmp_path / "cloud.csv"
    cloud.to_csv(path)
    assert path.read_text().splitlines()[0] == "x,y,z"
    back = PointCloud.from_csv(path)
    assert np.array_equal(back.points, cloud.points)


def test_plane_csv_round_trip(tmp_path):
    planes = [Plane(0, 0, 1, -1), Plane(1, 1, 0, 2)]
    path = tmp_path / "planes.csv"
    planes_to_csv(planes, path)
    assert path.read_text().splitlines()[0] == "alpha,beta,gamma,zeta"
    back = planes_from_csv(path)
    for a, b in zip(planes, back):
        assert np.array_equal(a.as_array(), b.as_array())


def test_cloud_csv_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(GeometryError):
        PointCloud.from_csv(path)
