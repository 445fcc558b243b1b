"""8-state quadrotor model used for both NMPC prediction and simulation truth.

State: position (3), linear velocity (3), roll, pitch.  Yaw is fixed at zero,
so the body axes are the world axes rotated by roll/pitch only.  Input:
mass-normalized thrust plus commanded roll and pitch; attitude follows a
first-order lag toward the command.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

STATE_DIM = 8
INPUT_DIM = 3

GRAVITY = 9.81


@dataclass
class ModelParams:
    """Physical parameters: gravity, attitude lag, gains, linear drag, step."""

    g: float = GRAVITY
    tau_phi: float = 0.5
    tau_theta: float = 0.5
    k_phi: float = 1.0
    k_theta: float = 1.0
    drag: tuple[float, float, float] = (0.1, 0.1, 0.1)
    ts: float = 0.05

    def __post_init__(self) -> None:
        if self.tau_phi <= 0 or self.tau_theta <= 0:
            raise ValueError("attitude time constants must be positive")
        if self.ts <= 0:
            raise ValueError("sampling period must be positive")


@dataclass
class MavState:
    """Position (m), velocity (m/s), roll and pitch (rad)."""

    p: np.ndarray
    v: np.ndarray
    phi: float = 0.0
    theta: float = 0.0

    def __post_init__(self) -> None:
        self.p = np.asarray(self.p, dtype=float).reshape(3)
        self.v = np.asarray(self.v, dtype=float).reshape(3)
        vec = self.as_vector()
        if not np.all(np.isfinite(vec)):
            raise ValueError("non-finite state")

    def as_vector(self) -> np.ndarray:
        return np.array(
            [*self.p, *self.v, self.phi, self.theta],
            dtype=float,
        )

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "MavState":
        x = np.asarray(x, dtype=float).reshape(STATE_DIM)
        return cls(p=x[:3].copy(), v=x[3:6].copy(), phi=float(x[6]), theta=float(x[7]))

    @classmethod
    def hover_at(cls, position) -> "MavState":
        return cls(p=np.asarray(position, dtype=float), v=np.zeros(3))


@dataclass
class ControlInput:
    """Mass-normalized thrust (m/s^2) and commanded roll/pitch (rad)."""

    thrust: float
    phi_d: float = 0.0
    theta_d: float = 0.0

    def as_vector(self) -> np.ndarray:
        return np.array([self.thrust, self.phi_d, self.theta_d], dtype=float)

    @classmethod
    def from_vector(cls, u: np.ndarray) -> "ControlInput":
        u = np.asarray(u, dtype=float).reshape(INPUT_DIM)
        return cls(thrust=float(u[0]), phi_d=float(u[1]), theta_d=float(u[2]))

    @classmethod
    def hover(cls, params: ModelParams) -> "ControlInput":
        return cls(thrust=params.g)


def wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def derivative_vec(x: np.ndarray, u: np.ndarray, params: ModelParams) -> np.ndarray:
    """Continuous-time state derivative f(x, u) on raw 8/3 vectors."""
    thrust, phi_d, theta_d = float(u[0]), float(u[1]), float(u[2])
    phi, theta = float(x[6]), float(x[7])
    sphi, cphi = math.sin(phi), math.cos(phi)
    stheta, ctheta = math.sin(theta), math.cos(theta)
    dx, dy, dz = params.drag
    out = np.empty(STATE_DIM)
    out[0:3] = x[3:6]
    out[3] = stheta * cphi * thrust - dx * x[3]
    out[4] = -sphi * thrust - dy * x[4]
    out[5] = cphi * ctheta * thrust - params.g - dz * x[5]
    out[6] = (params.k_phi * phi_d - phi) / params.tau_phi
    out[7] = (params.k_theta * theta_d - theta) / params.tau_theta
    return out


def step_euler_vec(x: np.ndarray, u: np.ndarray, params: ModelParams) -> np.ndarray:
    """One explicit-Euler step with angles wrapped back into [-pi, pi]."""
    nxt = x + params.ts * derivative_vec(x, u, params)
    nxt[6] = wrap_angle(nxt[6])
    nxt[7] = wrap_angle(nxt[7])
    return nxt


def continuous_derivative(state: MavState, u: ControlInput, params: ModelParams) -> np.ndarray:
    return derivative_vec(state.as_vector(), u.as_vector(), params)


def step_euler(state: MavState, u: ControlInput, params: ModelParams) -> MavState:
    return MavState.from_vector(step_euler_vec(state.as_vector(), u.as_vector(), params))


def rollout(x0: MavState, inputs, params: ModelParams) -> list[MavState]:
    """States x_1..x_N reached from x0 under the given input sequence."""
    seq = list(inputs)
    if len(seq) < 1:
        raise ValueError("rollout needs at least one input")
    states: list[MavState] = []
    x = x0
    for u in seq:
        x = step_euler(x, u, params)
        states.append(x)
    return states


def rollout_vec(x0: np.ndarray, u_seq: np.ndarray, params: ModelParams) -> np.ndarray:
    """Array rollout: (N, 3) inputs -> (N+1, 8) states including x0, unwrapped.

    Used by the controller's single-shooting objective, where the angle wrap
    would break differentiability; on the reachable domain (|angles| < pi)
    the wrapped and unwrapped trajectories coincide.
    """
    u_seq = np.asarray(u_seq, dtype=float)
    n = u_seq.shape[0]
    out = np.empty((n + 1, STATE_DIM))
    out[0] = x0
    x = np.array(x0, dtype=float)
    for j in range(n):
        x = x + params.ts * derivative_vec(x, u_seq[j], params)
        out[j + 1] = x
    return out
