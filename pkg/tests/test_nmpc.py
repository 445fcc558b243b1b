import math

import numpy as np
import pytest

from planenav.dynamics import ModelParams
from planenav.geometry import Plane
from planenav.nmpc import (
    AdaptiveWeights,
    ControllerState,
    NmpcConfig,
    NmpcObjective,
    VarianceWindow,
    control_step,
    entropy_weights,
    shannon_entropy,
    solve,
)

PARAMS = ModelParams()
LN10 = math.log(10.0)


def hover_vec():
    return np.zeros(8)


def u_ref():
    return np.array([PARAMS.g, 0.0, 0.0])


def make_objective(n=5, planes=(), x0=None, x_ref=None, penalty=10.0, qx=None, u_prev=None):
    cfg = NmpcConfig(horizon=n)
    if qx is None:
        qx = AdaptiveWeights.fixed(cfg.n_max).qx
    return NmpcObjective(
        x0 if x0 is not None else hover_vec(),
        x_ref if x_ref is not None else hover_vec(),
        u_prev if u_prev is not None else u_ref(),
        qx,
        list(planes),
        cfg,
        PARAMS,
        penalty,
    )


# ---------------------------------------------------------------- entropy


def test_entropy_uniform_window_max():
    for value in (0.3, 1.0, 2.25):
        h = shannon_entropy(np.full(10, value))
        assert h == pytest.approx(LN10, abs=1e-9)


def test_entropy_single_spike_near_zero():
    h = shannon_entropy(np.array([1.0] + [0.0] * 9))
    assert h <= 1e-6


def test_entropy_mixed_window_oracle():
    # Direct evaluation of -sum p ln p for window (1 x 10, 9 x 1).
    window = np.array([10.0] + [1.0] * 9)
    p = window / window.sum()
    expected = float(-(p * np.log(p)).sum())
    assert expected == pytest.approx(1.732552088116943, abs=1e-12)
    assert shannon_entropy(window) == pytest.approx(expected, abs=1e-9)
    assert shannon_entropy(window) == pytest.approx(1.733, abs=0.01)


def test_entropy_scale_invariance():
    rng = np.random.default_rng(0)
    for _ in range(20):
        w = rng.uniform(0.01, 5.0, size=10)
        assert shannon_entropy(1000.0 * w) == pytest.approx(shannon_entropy(w), abs=1e-9)


def test_entropy_bounds_random_windows():
    rng = np.random.default_rng(1)
    for _ in range(100):
        n = int(rng.integers(1, 11))
        w = rng.uniform(0.0, 3.0, size=n)
        h = shannon_entropy(w)
        assert -1e-12 <= h <= math.log(max(n, 2)) + 1e-12


def test_variance_window_ring_buffer():
    win = VarianceWindow(3)
    with pytest.raises(ValueError):
        win.entropies()
    for k in range(5):
        win.push(np.full(6, float(k)))
    assert len(win) == 3
    assert np.array_equal(win.axis_values(0), [2.0, 3.0, 4.0])
    with pytest.raises(ValueError):
        win.push([-1, 0, 0, 0, 0, 0])


def test_entropy_weights_shape_and_attitude():
    win = VarianceWindow(10)
    for _ in range(10):
        win.push(np.zeros(6))
    w = entropy_weights(win, q_attitude=(5.0, 5.0))
    assert w.qx.shape == (8,)
    assert w.qx[:6] == pytest.approx(np.full(6, LN10), abs=1e-9)
    assert w.qx[6:] == pytest.approx([5.0, 5.0])


# ---------------------------------------------------------------- objective


def test_objective_zero_at_hover():
    obj = make_objective(n=8)
    u = np.tile(u_ref(), 8)
    assert obj.value(u) == pytest.approx(0.0, abs=1e-20)


def test_objective_inactive_plane_below():
    # Plane 1.5 m below, d_s = 1: displacement stays zero, constraint slack.
    plane = Plane(0, 0, 1, 1.5)
    obj = make_objective(n=8, planes=[plane])
    u = np.tile(u_ref(), 8)
    assert obj.value(u) == pytest.approx(0.0, abs=1e-20)


def test_objective_plane_ahead_penalty_value():
    # Plane 0.5 m ahead along +x, hover inputs: N terms of (c/2) * 0.5^2.
    n, c = 6, 10.0
    plane = Plane(1, 0, 0, -0.5)
    obj = make_objective(n=n, planes=[plane], penalty=c)
    u = np.tile(u_ref(), n)
    parts = obj.value_parts(u)
    assert parts["collision_penalty"] == pytest.approx(0.5 * c * n * 0.25)
    assert obj.value(u) == pytest.approx(0.5 * c * n * 0.25)


def test_objective_rate_penalty_hand_value():
    n, c = 3, 10.0
    cfg = NmpcConfig(horizon=n)
    obj = make_objective(n=n, penalty=c)
    u = np.tile(u_ref(), n)
    u[1] = 0.15  # first phi_d jumps 0.15 from u_prev (bound 0.05)
    parts = obj.value_parts(u)
    # pair (u_prev, u0): excess 0.10; pair (u0, u1): excess 0.10.
    assert parts["rate_penalty"] == pytest.approx(0.5 * c * (0.1**2 + 0.1**2))
    assert cfg.dphi_max == 0.05


def test_gradient_zero_at_hover_minimum():
    obj = make_objective(n=6)
    g = obj.gradient(np.tile(u_ref(), 6))
    assert np.max(np.abs(g)) < 1e-8


def central_difference(obj, u, h=1e-6):
    g = np.zeros_like(u)
    for i in range(u.size):
        up, dn = u.copy(), u.copy()
        up[i] += h
        dn[i] -= h
        g[i] = (obj.value(up) - obj.value(dn)) / (2 * h)
    return g


@pytest.mark.parametrize("n", [3, 5, 10])
@pytest.mark.parametrize("with_planes", [False, True])
def test_gradient_matches_finite_differences(n, with_planes):
    rng = np.random.default_rng(100 + n + int(with_planes))
    planes = [Plane(1, 0.2, 0, -0.8), Plane(0, 1, 0.1, -0.6)] if with_planes else []
    for _ in range(12):
        x0 = rng.normal(size=8) * np.array([1, 1, 1, 0.5, 0.5, 0.5, 0.1, 0.1])
        x_ref = rng.normal(size=8) * np.array([2, 2, 2, 0.3, 0.3, 0.3, 0, 0])
        u_prev = np.array([PARAMS.g, 0, 0]) + rng.normal(size=3) * [1.0, 0.05, 0.05]
        qx = np.abs(rng.normal(size=8)) + 0.5
        obj = make_objective(n=n, planes=planes, x0=x0, x_ref=x_ref, qx=qx, u_prev=u_prev)
        u = np.tile(u_ref(), n) + rng.normal(size=3 * n) * np.tile([1.5, 0.1, 0.1], n)
        analytic = obj.gradient(u)
        fd = central_difference(obj, u)
        rel = np.linalg.norm(analytic - fd) / max(np.linalg.norm(fd), 1e-12)
        assert rel < 1e-5


def test_gradient_actuation_term_scales_with_weight():
    # With qx = 0, no smoothness and no penalties, the whole gradient is the
    # actuation term, which is linear in q_u.
    n = 4
    rng = np.random.default_rng(7)
    u = np.tile(u_ref(), n) + rng.normal(size=3 * n) * 0.1
    qx = np.zeros(8)
    cfg1 = NmpcConfig(horizon=n, q_u=(10.0, 10.0, 10.0), q_du=(0.0, 0.0, 0.0))
    cfg2 = NmpcConfig(horizon=n, q_u=(20.0, 20.0, 20.0), q_du=(0.0, 0.0, 0.0))
    o1 = NmpcObjective(hover_vec(), hover_vec(), u_ref(), qx, [], cfg1, PARAMS, 0.0)
    o2 = NmpcObjective(hover_vec(), hover_vec(), u_ref(), qx, [], cfg2, PARAMS, 0.0)
    assert np.allclose(o2.gradient(u), 2.0 * o1.gradient(u))


def test_body_frame_translation_invariance():
    # Shifting current and reference position by the same world offset leaves
    # collision penalties along the optimized rollout unchanged.
    n = 6
    plane = Plane(1, 0, 0, -0.9)
    offset = np.array([5.0, -3.0, 2.0])
    rng = np.random.default_rng(9)
    u = np.tile(u_ref(), n) + rng.normal(size=3 * n) * 0.2
    x0 = np.array([0.0, 0, 0, 0.4, 0.1, 0, 0.02, -0.03])
    x_ref = np.array([1.0, 0.5, 0, 0, 0, 0, 0, 0])
    x0_shift = x0.copy()
    x0_shift[:3] += offset
    ref_shift = x_ref.copy()
    ref_shift[:3] += offset
    a = make_objective(n=n, planes=[plane], x0=x0, x_ref=x_ref)
    b = make_objective(n=n, planes=[plane], x0=x0_shift, x_ref=ref_shift)
    assert a.value_parts(u)["collision_penalty"] == pytest.approx(
        b.value_parts(u)["collision_penalty"], rel=1e-12
    )
    assert a.value(u) == pytest.approx(b.value(u), rel=1e-9)


# ---------------------------------------------------------------- solve


def test_solve_hover_reaches_reference_input():
    cfg = NmpcConfig(horizon=10, solver_tol=1e-6)
    qx = AdaptiveWeights.fixed(cfg.n_max).qx
    sol = solve(hover_vec(), hover_vec(), u_ref(), qx, [], None, cfg, PARAMS)
    assert sol.converged
    assert sol.cost < 1e-6
    assert np.max(np.abs(sol.u_star - u_ref()[None, :])) < 1e-4


def test_solve_respects_box_exactly():
    cfg = NmpcConfig(horizon=8)
    qx = AdaptiveWeights.fixed(cfg.n_max).qx
    x_ref = np.array([4.0, -4.0, 2.0, 0, 0, 0, 0, 0])
    sol = solve(hover_vec(), x_ref, u_ref(), qx, [], None, cfg, PARAMS)
    lo = np.asarray(cfg.u_min)
    hi = np.asarray(cfg.u_max)
    assert np.all(sol.u_star >= lo[None, :])
    assert np.all(sol.u_star <= hi[None, :])


def test_solve_keeps_safe_distance_from_plane():
    # Reference 1 m beyond a wall that sits 1.5 m ahead; d_s = 1.
    cfg = NmpcConfig(horizon=20, solver_tol=1e-4)
    qx = AdaptiveWeights.fixed(cfg.n_max).qx
    plane = Plane(1, 0, 0, -1.5)
    x_ref = np.array([2.5, 0, 0, 0, 0, 0, 0, 0])
    sol = solve(hover_vec(), x_ref, u_ref(), qx, [plane], None, cfg, PARAMS)
    assert sol.converged
    obj = make_objective(n=20, planes=[plane], x_ref=x_ref)
    states = obj.rollout(sol.u_star.ravel())
    dists = np.abs(states[1:, 0] - 0.0 - 1.5)
    assert np.min(dists) >= cfg.d_s - cfg.constraint_tol - 1e-9
    assert sol.max_constraint_violation <= cfg.constraint_tol


def test_solve_penalty_violations_non_increasing():
    cfg = NmpcConfig(horizon=15)
    qx = AdaptiveWeights.fixed(cfg.n_max).qx
    plane = Plane(1, 0, 0, -1.2)
    x_ref = np.array([3.0, 0, 0, 0, 0, 0, 0, 0])
    sol = solve(hover_vec(), x_ref, u_ref(), qx, [plane], None, cfg, PARAMS)
    v = sol.violations_per_round
    assert all(b <= a + 1e-9 for a, b in zip(v, v[1:]))
    assert sol.penalty_rounds == len(v)


def test_solution_reports_violation_when_infeasible():
    # Two walls 1.2 m apart with d_s = 1: infeasible; solver must flag it.
    cfg = NmpcConfig(horizon=10)
    qx = AdaptiveWeights.fixed(cfg.n_max).qx
    planes = [Plane(0, 1, 0, -0.6), Plane(0, 1, 0, 0.6)]
    sol = solve(hover_vec(), hover_vec(), u_ref(), qx, planes, None, cfg, PARAMS)
    assert not sol.converged
    assert sol.max_constraint_violation > cfg.constraint_tol


# ------------------------------------------------------------- control_step


def test_control_step_zero_variance_gives_max_weights():
    cfg = NmpcConfig(horizon=5)
    ctrl = ControllerState(config=cfg, params=PARAMS)
    for _ in range(10):
        ctrl.window.push(np.zeros(6))
    w = entropy_weights(ctrl.window)
    assert w.qx[:6] == pytest.approx(np.full(6, LN10), abs=1e-9)


def test_control_step_variance_spike_drops_position_weight():
    win = VarianceWindow(10)
    for _ in range(9):
        win.push(np.full(6, 0.01))
    win.push(np.array([1.5**2, 1.5**2, 0.01, 0.01, 0.01, 0.01]))
    w = entropy_weights(win)
    # Spiked position axes lose weight relative to steady velocity axes.
    assert w.qx[0] < w.qx[3]
    assert w.qx[1] < w.qx[4]
    assert w.qx[2] == pytest.approx(w.qx[5])


def test_control_step_tracks_reference_at_rest():
    cfg = NmpcConfig(horizon=10, solver_tol=1e-5)
    ctrl = ControllerState(config=cfg, params=PARAMS)
    plane = Plane(0, 0, 1, 2.0)  # floor 2 m below: inactive
    u0, sol = control_step(ctrl, hover_vec(), np.zeros(6), hover_vec(), [plane])
    assert u0 == pytest.approx(u_ref(), abs=1e-3)
    assert sol.converged
    # warm start was stored, shifted by one
    assert ctrl.warm.shape == (10, 3)
    assert np.array_equal(ctrl.u_prev, u0)


def test_control_step_warm_start_speeds_up_second_tick():
    cfg = NmpcConfig(horizon=20)
    ctrl = ControllerState(config=cfg, params=PARAMS)
    x_ref = np.array([1.0, 0, 0, 0, 0, 0, 0, 0])
    _, s1 = control_step(ctrl, hover_vec(), np.zeros(6), x_ref, [])
    _, s2 = control_step(ctrl, hover_vec(), np.zeros(6), x_ref, [])
    assert s2.inner_iterations <= s1.inner_iterations
