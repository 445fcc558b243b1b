import numpy as np
import pytest

from planenav.panoc import panoc_minimize


def test_unconstrained_quadratic():
    n = 12
    f = lambda u: float(u @ u)
    g = lambda u: 2.0 * u
    res = panoc_minimize(
        f, g, np.full(n, 0.7), np.full(n, -1.0), np.full(n, 1.0), tol=1e-8, max_iters=200
    )
    assert res.converged
    assert np.max(np.abs(res.u)) < 1e-6


def test_clipped_quadratic_hits_box_face():
    n = 6
    target = 2.0 * np.ones(n)
    f = lambda u: float((u - target) @ (u - target))
    g = lambda u: 2.0 * (u - target)
    res = panoc_minimize(
        f, g, np.zeros(n), -np.ones(n), np.ones(n), tol=1e-8, max_iters=200
    )
    assert res.converged
    assert res.u == pytest.approx(np.ones(n), abs=1e-10)


def test_iterate_always_feasible():
    rng = np.random.default_rng(0)
    lo, hi = -0.3 * np.ones(4), 0.8 * np.ones(4)
    target = rng.normal(size=4) * 3
    f = lambda u: float((u - target) @ (u - target))
    g = lambda u: 2.0 * (u - target)
    for max_iters in (1, 2, 5, 100):
        res = panoc_minimize(f, g, rng.uniform(-0.3, 0.8, 4), lo, hi, tol=1e-10, max_iters=max_iters)
        assert np.all(res.u >= lo) and np.all(res.u <= hi)


def test_rosenbrock_in_box():
    def f(u):
        return float((1 - u[0]) ** 2 + 100.0 * (u[1] - u[0] ** 2) ** 2)

    def g(u):
        return np.array(
            [
                -2.0 * (1 - u[0]) - 400.0 * u[0] * (u[1] - u[0] ** 2),
                200.0 * (u[1] - u[0] ** 2),
            ]
        )

    res = panoc_minimize(
        f,
        g,
        np.array([-1.5, 0.5]),
        np.array([-2.0, -2.0]),
        np.array([2.0, 2.0]),
        tol=1e-7,
        max_iters=500,
    )
    assert res.converged
    assert res.u == pytest.approx([1.0, 1.0], abs=1e-4)


def test_non_convergence_flagged():
    def f(u):
        return float((1 - u[0]) ** 2 + 100.0 * (u[1] - u[0] ** 2) ** 2)

    def g(u):
        return np.array(
            [
                -2.0 * (1 - u[0]) - 400.0 * u[0] * (u[1] - u[0] ** 2),
                200.0 * (u[1] - u[0] ** 2),
            ]
        )

    res = panoc_minimize(
        f,
        g,
        np.array([-1.5, 0.5]),
        np.array([-2.0, -2.0]),
        np.array([2.0, 2.0]),
        tol=1e-12,
        max_iters=3,
    )
    assert not res.converged
    assert res.iterations == 3
    assert np.all(np.isfinite(res.u))
