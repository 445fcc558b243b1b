import math

import numpy as np
import pytest

from planenav.dynamics import (
    ControlInput,
    MavState,
    ModelParams,
    continuous_derivative,
    derivative_vec,
    rollout,
    rollout_vec,
    step_euler,
    step_euler_vec,
    wrap_angle,
)


PARAMS = ModelParams()


def hover_state():
    return MavState(p=np.zeros(3), v=np.zeros(3))


def hover_input():
    return ControlInput.hover(PARAMS)


def test_hover_equilibrium():
    d = continuous_derivative(hover_state(), hover_input(), PARAMS)
    assert np.array_equal(d, np.zeros(8))


def test_free_fall():
    d = continuous_derivative(hover_state(), ControlInput(0.0), PARAMS)
    assert d[:5] == pytest.approx([0, 0, 0, 0, 0])
    assert d[5] == pytest.approx(-PARAMS.g)


def test_pitch_produces_forward_acceleration():
    params = ModelParams(drag=(0.0, 0.0, 0.0))
    st = MavState(p=np.zeros(3), v=np.zeros(3), phi=0.0, theta=0.1)
    d = continuous_derivative(st, ControlInput(params.g), params)
    assert d[3] == pytest.approx(params.g * math.sin(0.1))
    assert d[3] == pytest.approx(0.9793668, abs=1e-6)


def test_euler_hover_fixed_point():
    nxt = step_euler(hover_state(), hover_input(), PARAMS)
    assert np.array_equal(nxt.as_vector(), hover_state().as_vector())


def test_euler_attitude_step_hand_value():
    params = ModelParams(tau_phi=0.5, k_phi=1.0, ts=0.05)
    nxt = step_euler(hover_state(), ControlInput(params.g, phi_d=0.4), params)
    assert nxt.phi == pytest.approx(0.05 * (0.4 / 0.5))
    assert nxt.phi == pytest.approx(0.04)


def test_euler_order_half_steps():
    params = ModelParams()
    half = ModelParams(ts=params.ts / 2)
    x = np.array([0.1, -0.2, 0.3, 0.5, -0.1, 0.2, 0.05, -0.03])
    u = np.array([9.0, 0.1, -0.2])
    one = step_euler_vec(x, u, params)
    two = step_euler_vec(step_euler_vec(x, u, half), u, half)
    # Two half-steps differ from one full step by O(ts^2).
    assert np.max(np.abs(one - two)) < 5.0 * params.ts**2


def test_angle_wrap():
    assert wrap_angle(math.pi + 0.1) == pytest.approx(-math.pi + 0.1)
    assert wrap_angle(-math.pi - 0.1) == pytest.approx(math.pi - 0.1)
    assert wrap_angle(0.3) == pytest.approx(0.3)


def test_rollout_hover_is_constant():
    states = rollout(hover_state(), [hover_input()] * 40, PARAMS)
    assert len(states) == 40
    for s in states:
        assert np.array_equal(s.as_vector(), hover_state().as_vector())


def test_rollout_monotone_forward_speed():
    u = ControlInput(PARAMS.g, theta_d=0.1)
    states = rollout(hover_state(), [u] * 10, PARAMS)
    vx = [s.v[0] for s in states]
    assert all(b > a for a, b in zip(vx, vx[1:]))


def test_rollout_single_step_consistency():
    u = ControlInput(8.0, 0.05, -0.02)
    st = MavState(p=np.ones(3), v=np.array([0.1, 0.0, -0.2]), phi=0.02, theta=-0.01)
    assert np.array_equal(
        rollout(st, [u], PARAMS)[0].as_vector(), step_euler(st, u, PARAMS).as_vector()
    )


def test_rollout_empty_raises():
    with pytest.raises(ValueError):
        rollout(hover_state(), [], PARAMS)


def test_rollout_vec_matches_object_api():
    rng = np.random.default_rng(0)
    x0 = rng.normal(size=8) * 0.2
    useq = np.column_stack(
        [rng.uniform(5, 14, 7), rng.uniform(-0.3, 0.3, 7), rng.uniform(-0.3, 0.3, 7)]
    )
    arr = rollout_vec(x0, useq, PARAMS)
    states = rollout(MavState.from_vector(x0), [ControlInput.from_vector(u) for u in useq], PARAMS)
    for j, s in enumerate(states):
        assert np.allclose(arr[j + 1], s.as_vector(), atol=1e-12)


def test_decoupling_at_zero_angles():
    # At phi = 0 the roll command does not enter the x-acceleration; at
    # theta = 0 the pitch command does not enter the y-acceleration.
    st = hover_state()
    base = derivative_vec(st.as_vector(), np.array([PARAMS.g, 0.0, 0.0]), PARAMS)
    with_phid = derivative_vec(st.as_vector(), np.array([PARAMS.g, 0.3, 0.0]), PARAMS)
    with_thetad = derivative_vec(st.as_vector(), np.array([PARAMS.g, 0.0, 0.3]), PARAMS)
    assert with_phid[3] == base[3]
    assert with_thetad[4] == base[4]


def test_attitude_first_order_response_monotone():
    params = ModelParams(k_phi=1.0, tau_phi=0.5, ts=0.05)
    x = hover_state().as_vector()
    u = np.array([params.g, 0.3, 0.0])
    phis = []
    for _ in range(60):
        x = step_euler_vec(x, u, params)
        phis.append(x[6])
    diffs = np.diff(phis)
    assert np.all(diffs > -1e-15)
    assert phis[-1] == pytest.approx(0.3, abs=1e-2)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(tau_phi=0.0)
    with pytest.raises(ValueError):
        ModelParams(ts=-0.1)
