"""Finite-horizon controller: tracking cost with entropy-adaptive weights,
body-frame plane-collision and input-rate constraints enforced through an
escalating quadratic penalty, solved by the box-constrained PANOC engine.

States are eliminated by single shooting, so the decision variable is the
flat input sequence u in R^{3N}.  The objective and its exact adjoint
gradient are fused in one pass; this is the 20 Hz hot path, so the inner
recursions run on plain floats.
"""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .dynamics import INPUT_DIM, STATE_DIM, ModelParams
from .panoc import panoc_minimize

VARIANCE_FLOOR = 1e-12


@dataclass
class NmpcConfig:
    """Horizon, weights, bounds, safety distance and penalty-loop parameters."""

    horizon: int = 40
    ts: float = 0.05
    q_u: tuple[float, float, float] = (10.0, 10.0, 10.0)
    q_du: tuple[float, float, float] = (20.0, 20.0, 20.0)
    q_attitude: tuple[float, float] = (5.0, 5.0)
    u_min: tuple[float, float, float] = (0.0, -0.4, -0.4)
    u_max: tuple[float, float, float] = (2.0 * 9.81, 0.4, 0.4)
    d_s: float = 1.0
    dphi_max: float = 0.05
    dtheta_max: float = 0.05
    n_max: int = 10
    solver_tol: float = 1e-3
    solver_step_tol: float = 1e-5
    penalty_rounds_per_tick: int = 3
    penalty_init: float = 10.0
    penalty_factor: float = 5.0
    penalty_max: float = 1e6
    constraint_tol: float = 0.05
    max_inner_iters: int = 150
    lbfgs_memory: int = 10

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.d_s <= 0:
            raise ValueError("safety distance must be positive")
        if self.penalty_factor <= 1:
            raise ValueError("penalty_factor must exceed 1")
        if not all(lo < hi for lo, hi in zip(self.u_min, self.u_max)):
            raise ValueError("u_min must be elementwise below u_max")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")


class VarianceWindow:
    """Rolling per-axis windows of measurement-variance samples.

    Axes: (p_x, p_y, p_z, v_x, v_y, v_z).  Holds at most ``n_max`` samples
    per axis; newest sample evicts the oldest.
    """

    N_AXES = 6

    def __init__(self, n_max: int):
        if n_max < 1:
            raise ValueError("n_max must be >= 1")
        self.n_max = n_max
        self._buffers = [deque(maxlen=n_max) for _ in range(self.N_AXES)]

    def __len__(self) -> int:
        return len(self._buffers[0])

    def push(self, samples) -> None:
        samples = np.asarray(samples, dtype=float).reshape(self.N_AXES)
        if np.any(samples < 0):
            raise ValueError("variance samples must be non-negative")
        for buf, s in zip(self._buffers, samples):
            buf.append(float(s))

    def axis_values(self, axis: int) -> np.ndarray:
        return np.array(self._buffers[axis], dtype=float)

    def entropies(self) -> np.ndarray:
        if len(self) == 0:
            raise ValueError("variance window is empty")
        out = np.empty(self.N_AXES)
        for i, buf in enumerate(self._buffers):
            out[i] = shannon_entropy(np.array(buf, dtype=float))
        return out


def shannon_entropy(variances: np.ndarray) -> float:
    """Entropy of the normalized variance window, with an epsilon floor so the
    distribution is defined even for all-zero windows.

    Uniform windows give the maximum ln(n); a single dominant spike gives ~0.
    """
    v = np.asarray(variances, dtype=float) + VARIANCE_FLOOR
    p = v / v.sum()
    return float(-(p * np.log(p)).sum())


@dataclass(frozen=True)
class AdaptiveWeights:
    """Diagonal of Q_x: six entropy-driven entries plus fixed attitude weights."""

    qx: np.ndarray

    @classmethod
    def from_entropies(cls, entropies, q_attitude=(5.0, 5.0)) -> "AdaptiveWeights":
        h = np.asarray(entropies, dtype=float).reshape(6)
        return cls(qx=np.concatenate([h, np.asarray(q_attitude, dtype=float)]))

    @classmethod
    def fixed(cls, n_max: int, q_attitude=(5.0, 5.0)) -> "AdaptiveWeights":
        # The value adaptive weighting settles at for clean (uniform) windows.
        h = math.log(n_max) * np.ones(6)
        return cls(qx=np.concatenate([h, np.asarray(q_attitude, dtype=float)]))


def entropy_weights(window: VarianceWindow, q_attitude=(5.0, 5.0)) -> AdaptiveWeights:
    """Per-axis Shannon entropies of the variance windows as tracking weights."""
    return AdaptiveWeights.from_entropies(window.entropies(), q_attitude)


def _planes_to_arrays(planes) -> tuple[np.ndarray, np.ndarray]:
    if not planes:
        return np.zeros((0, 3)), np.zeros(0)
    normals = np.array([p.normal for p in planes], dtype=float)
    zetas = np.array([p.zeta for p in planes], dtype=float)
    return normals, zetas


def constraint_relevant_planes(planes, cloud_points: np.ndarray, max_foot_gap: float = 0.75):
    """Keep only planes whose collision constraint is evidence-backed.

    The constraint binds at the plane's closest approach to the sensor (body
    frame, origin).  Without a measured return near that foot point the plane
    is a coplanar coincidence (e.g. several lidar rings slicing across walls
    at one height) and its constraint would extrapolate into unobserved
    space.  The allowed gap widens with plane distance, matching the angular
    spread of the scan pattern.
    """
    if max_foot_gap <= 0 or not planes:
        return list(planes)
    pts = np.asarray(cloud_points, dtype=float).reshape(-1, 3)
    if pts.shape[0] == 0:
        return []
    kept = []
    for plane in planes:
        foot = -plane.zeta * plane.normal
        gap = float(np.min(np.linalg.norm(pts - foot, axis=1)))
        if gap <= max(max_foot_gap, 0.3 * abs(plane.zeta)):
            kept.append(plane)
    return kept


class NmpcObjective:
    """Smooth penalty objective over the flat input sequence (single shooting).

    Collision terms act on the predicted body-frame displacement
    ``p_{k+j|k} - p_{k|k}`` for j = 1..N against each plane; rate terms act on
    successive input differences including the (previous input, first input)
    pair.  ``max(0, .)**2`` keeps everything continuously differentiable.
    """

    def __init__(
        self,
        x0: np.ndarray,
        x_ref: np.ndarray,
        u_prev: np.ndarray,
        qx: np.ndarray,
        planes,
        config: NmpcConfig,
        params: ModelParams,
        penalty: float,
    ):
        self.x0 = np.asarray(x0, dtype=float).reshape(STATE_DIM)
        self.x_ref = np.asarray(x_ref, dtype=float).reshape(STATE_DIM)
        self.u_prev = np.asarray(u_prev, dtype=float).reshape(INPUT_DIM)
        self.qx = np.asarray(qx, dtype=float).reshape(STATE_DIM)
        # Input weights are stated for the normalized input convention, where
        # thrust lives on a unit interval; applied to mass-normalized thrust
        # (m/s^2) the thrust components pick up the affine-map Jacobian.
        thrust_span = float(config.u_max[0] - config.u_min[0])
        unit_scale = np.array([1.0 / thrust_span**2, 1.0, 1.0])
        self.qu = np.asarray(config.q_u, dtype=float) * unit_scale
        self.qdu = np.asarray(config.q_du, dtype=float) * unit_scale
        self.normals, self.zetas = _planes_to_arrays(planes)
        self.config = config
        self.params = params
        self.penalty = float(penalty)
        self.u_ref = np.array([params.g, 0.0, 0.0])
        self.n = config.horizon
        self._memo_key: bytes | None = None
        self._memo: tuple[float, np.ndarray] | None = None
        self._value_memo_key: bytes | None = None
        self._value_memo: float = 0.0

    # ------------------------------------------------------------------
    def rollout(self, u_flat: np.ndarray) -> np.ndarray:
        """(N+1, 8) predicted states including the current one."""
        from .dynamics import rollout_vec

        return rollout_vec(self.x0, np.asarray(u_flat, dtype=float).reshape(self.n, 3), self.params)

    # ------------------------------------------------------------------
    def _forward(self, u_list: list) -> tuple[list, list]:
        """Scalar forward rollout; returns per-step states x_1..x_N and trig."""
        p = self.params
        ts, g = p.ts, p.g
        dx, dy, dz = p.drag
        k_phi, k_theta = p.k_phi, p.k_theta
        tau_phi, tau_theta = p.tau_phi, p.tau_theta
        px, py, pz, vx, vy, vz, phi, theta = self.x0.tolist()

        states = []
        trig = []
        sin, cos = math.sin, math.cos
        for j in range(self.n):
            base = 3 * j
            thr = u_list[base]
            phi_d = u_list[base + 1]
            theta_d = u_list[base + 2]
            sphi, cphi = sin(phi), cos(phi)
            sth, cth = sin(theta), cos(theta)
            trig.append((sphi, cphi, sth, cth, thr))
            ax = sth * cphi * thr - dx * vx
            ay = -sphi * thr - dy * vy
            az = cphi * cth * thr - g - dz * vz
            px += ts * vx
            py += ts * vy
            pz += ts * vz
            vx += ts * ax
            vy += ts * ay
            vz += ts * az
            phi += ts * (k_phi * phi_d - phi) / tau_phi
            theta += ts * (k_theta * theta_d - theta) / tau_theta
            states.append((px, py, pz, vx, vy, vz, phi, theta))
        return states, trig

    # ------------------------------------------------------------------
    def _evaluate(self, u_flat: np.ndarray, need_grad: bool):
        cfg = self.config
        n = self.n
        u_list = u_flat.tolist()
        states, trig = self._forward(u_list)
        X = np.array(states)  # (N, 8): x_1 .. x_N
        U = u_flat.reshape(n, 3)
        c = self.penalty

        # Tracking + attitude cost and its per-state gradient.
        err = X - self.x_ref
        value = float((err * err * self.qx).sum())
        grad_state = 2.0 * self.qx * err if need_grad else None

        # Collision penalty on predicted body-frame displacements.
        if self.normals.shape[0]:
            disp = X[:, :3] - self.x0[:3]
            s = disp @ self.normals.T + self.zetas
            deficit = cfg.d_s - np.abs(s)
            np.maximum(deficit, 0.0, out=deficit)
            value += 0.5 * c * float((deficit * deficit).sum())
            if need_grad:
                active = deficit > 0.0
                if active.any():
                    w = np.where(active, c * deficit * np.sign(s), 0.0)
                    grad_state[:, :3] -= w @ self.normals

        # Actuation cost.
        du_ref = U - self.u_ref
        value += float((du_ref * du_ref * self.qu).sum())

        # Successive differences, with u_prev prepended: N pairs.
        D = np.empty_like(U)
        D[0] = U[0] - self.u_prev
        D[1:] = U[1:] - U[:-1]
        value += float((D * D * self.qdu).sum())

        pair_grad = 2.0 * self.qdu * D if need_grad else None
        for col, bound in ((1, cfg.dphi_max), (2, cfg.dtheta_max)):
            excess = np.abs(D[:, col]) - bound
            mask = excess > 0.0
            if mask.any():
                value += 0.5 * c * float((excess[mask] ** 2).sum())
                if need_grad:
                    pair_grad[mask, col] += c * excess[mask] * np.sign(D[mask, col])

        if not need_grad:
            return value, None

        gu = 2.0 * self.qu * du_ref
        gu += pair_grad
        gu[:-1] -= pair_grad[1:]

        # Adjoint sweep for the state-dependent terms (plain floats: hot path).
        p = self.params
        ts = p.ts
        dxc = 1.0 - ts * p.drag[0]
        dyc = 1.0 - ts * p.drag[1]
        dzc = 1.0 - ts * p.drag[2]
        aphi = 1.0 - ts / p.tau_phi
        atheta = 1.0 - ts / p.tau_theta
        bphi = ts * p.k_phi / p.tau_phi
        btheta = ts * p.k_theta / p.tau_theta

        tg = grad_state.tolist()
        gu_list = gu.ravel().tolist()
        lpx, lpy, lpz, lvx, lvy, lvz, lph, lth = tg[n - 1]
        for j in range(n - 1, -1, -1):
            sphi, cphi, sth, cth, thr = trig[j]
            base = 3 * j
            gu_list[base] += ts * (sth * cphi * lvx - sphi * lvy + cphi * cth * lvz)
            gu_list[base + 1] += bphi * lph
            gu_list[base + 2] += btheta * lth
            if j == 0:
                break
            n_lvx = ts * lpx + dxc * lvx
            n_lvy = ts * lpy + dyc * lvy
            n_lvz = ts * lpz + dzc * lvz
            n_lph = ts * thr * (-sth * sphi * lvx - cphi * lvy - sphi * cth * lvz) + aphi * lph
            n_lth = ts * thr * (cth * cphi * lvx - cphi * sth * lvz) + atheta * lth
            t8 = tg[j - 1]
            lpx += t8[0]
            lpy += t8[1]
            lpz += t8[2]
            lvx = n_lvx + t8[3]
            lvy = n_lvy + t8[4]
            lvz = n_lvz + t8[5]
            lph = n_lph + t8[6]
            lth = n_lth + t8[7]

        return value, np.array(gu_list)

    def value_and_gradient(self, u_flat: np.ndarray) -> tuple[float, np.ndarray]:
        u_flat = np.asarray(u_flat, dtype=float)
        key = u_flat.tobytes()
        if key == self._memo_key and self._memo is not None:
            return self._memo
        value, grad = self._evaluate(u_flat, need_grad=True)
        self._memo_key = key
        self._memo = (value, grad)
        return value, grad

    def value(self, u_flat: np.ndarray) -> float:
        u_flat = np.asarray(u_flat, dtype=float)
        key = u_flat.tobytes()
        if key == self._memo_key and self._memo is not None:
            return self._memo[0]
        if key == self._value_memo_key:
            return self._value_memo
        value, _ = self._evaluate(u_flat, need_grad=False)
        self._value_memo_key = key
        self._value_memo = value
        return value

    def gradient(self, u_flat: np.ndarray) -> np.ndarray:
        return self.value_and_gradient(u_flat)[1]

    def value_parts(self, u_flat: np.ndarray) -> dict:
        """Cost decomposition for diagnostics and tests."""
        u_flat = np.asarray(u_flat, dtype=float)
        cfg = self.config
        states, _ = self._forward(u_flat.tolist())
        X = np.array(states)
        U = u_flat.reshape(self.n, 3)
        err = X - self.x_ref
        parts = {"tracking": float((err * err * self.qx).sum())}
        du_ref = U - self.u_ref
        parts["actuation"] = float((du_ref * du_ref * self.qu).sum())
        D = np.empty_like(U)
        D[0] = U[0] - self.u_prev
        D[1:] = U[1:] - U[:-1]
        parts["smoothness"] = float((D * D * self.qdu).sum())
        coll = 0.0
        if self.normals.shape[0]:
            disp = X[:, :3] - self.x0[:3]
            s = disp @ self.normals.T + self.zetas
            deficit = np.maximum(cfg.d_s - np.abs(s), 0.0)
            coll = 0.5 * self.penalty * float((deficit * deficit).sum())
        parts["collision_penalty"] = coll
        rate = 0.0
        for col, bound in ((1, cfg.dphi_max), (2, cfg.dtheta_max)):
            excess = np.maximum(np.abs(D[:, col]) - bound, 0.0)
            rate += 0.5 * self.penalty * float((excess**2).sum())
        parts["rate_penalty"] = rate
        parts["total"] = sum(parts.values())
        return parts

    def constraint_violations(self, u_flat: np.ndarray) -> tuple[float, float]:
        """(max collision deficit, max rate excess) of the rolled-out solution."""
        u_flat = np.asarray(u_flat, dtype=float)
        states, _ = self._forward(u_flat.tolist())
        X = np.array(states)
        U = u_flat.reshape(self.n, 3)
        coll = 0.0
        if self.normals.shape[0]:
            disp = X[:, :3] - self.x0[:3]
            s = disp @ self.normals.T + self.zetas
            coll = float(np.max(np.maximum(self.config.d_s - np.abs(s), 0.0)))
        D = np.empty_like(U)
        D[0] = U[0] - self.u_prev
        D[1:] = U[1:] - U[:-1]
        rate = max(
            float(np.max(np.maximum(np.abs(D[:, 1]) - self.config.dphi_max, 0.0))),
            float(np.max(np.maximum(np.abs(D[:, 2]) - self.config.dtheta_max, 0.0))),
        )
        return coll, rate

    def max_violation(self, u_flat: np.ndarray) -> float:
        coll, rate = self.constraint_violations(u_flat)
        return max(coll, rate)


@dataclass
class NmpcSolution:
    """Optimal input sequence plus solver diagnostics for the trace."""

    u_star: np.ndarray
    cost: float
    max_constraint_violation: float
    inner_iterations: int
    penalty_rounds: int
    solve_time_s: float
    converged: bool
    inner_converged: bool
    final_penalty: float = 0.0
    violations_per_round: list[float] = field(default_factory=list)


def solve(
    x_est: np.ndarray,
    x_ref: np.ndarray,
    u_prev: np.ndarray,
    qx: np.ndarray,
    planes,
    warm_start: np.ndarray | None,
    config: NmpcConfig,
    params: ModelParams,
    initial_penalty: float | None = None,
    max_rounds: int | None = None,
) -> NmpcSolution:
    """Penalty outer loop around the PANOC inner solver.

    The penalty weight starts at ``penalty_init`` (or the caller-provided
    warm value) and is multiplied by ``penalty_factor`` (warm-starting from
    the previous solution) until the worst collision/rate violation drops
    below ``constraint_tol`` or the weight would exceed ``penalty_max``.
    Non-convergence is flagged, never raised: the caller applies the best
    iterate under the real-time contract.
    """
    t_start = time.perf_counter()
    n = config.horizon
    u_ref = np.array([params.g, 0.0, 0.0])
    lower = np.tile(np.asarray(config.u_min, dtype=float), n)
    upper = np.tile(np.asarray(config.u_max, dtype=float), n)
    if warm_start is not None:
        u = np.asarray(warm_start, dtype=float).reshape(n * 3).copy()
    else:
        u = np.tile(u_ref, n)
    u = np.clip(u, lower, upper)

    penalty = config.penalty_init if initial_penalty is None else initial_penalty
    penalty = min(max(penalty, config.penalty_init), config.penalty_max)
    total_iters = 0
    rounds = 0
    violations: list[float] = []
    inner_converged = False
    viol = np.inf
    cost = np.inf
    while True:
        objective = NmpcObjective(x_est, x_ref, u_prev, qx, planes, config, params, penalty)
        result = panoc_minimize(
            objective.value,
            objective.gradient,
            u,
            lower,
            upper,
            tol=config.solver_tol,
            max_iters=config.max_inner_iters,
            lbfgs_memory=config.lbfgs_memory,
            step_tol=config.solver_step_tol,
        )
        u = result.u
        cost = result.cost
        inner_converged = result.converged
        total_iters += result.iterations
        rounds += 1
        viol = objective.max_violation(u)
        violations.append(viol)
        if viol <= config.constraint_tol:
            break
        if len(violations) >= 2 and viol > 0.93 * violations[-2]:
            # Escalation has stopped buying violation: the remaining deficit
            # is infeasible for this problem instance (e.g. the current state
            # already violates, or the estimate is corrupted).  A hard-capped
            # penalty would only act through fit imperfections of the plane
            # normals, so stop here and report the violation.
            break
        if max_rounds is not None and rounds >= max_rounds:
            break
        next_penalty = penalty * config.penalty_factor
        if next_penalty > config.penalty_max:
            break
        penalty = next_penalty

    return NmpcSolution(
        u_star=u.reshape(n, 3),
        cost=cost,
        max_constraint_violation=viol,
        inner_iterations=total_iters,
        penalty_rounds=rounds,
        solve_time_s=time.perf_counter() - t_start,
        converged=viol <= config.constraint_tol,
        inner_converged=inner_converged,
        final_penalty=penalty,
        violations_per_round=violations,
    )


@dataclass
class ControllerState:
    """Mutable per-controller bookkeeping across ticks."""

    config: NmpcConfig
    params: ModelParams
    adaptive: bool = True
    u_prev: np.ndarray | None = None
    warm: np.ndarray | None = None
    window: VarianceWindow | None = None
    warm_penalty: float | None = None

    def __post_init__(self) -> None:
        if self.u_prev is None:
            self.u_prev = np.array([self.params.g, 0.0, 0.0])
        if self.window is None:
            # Pre-fill with zero variances ("no noise observed"): a uniform
            # floored window gives maximal tracking weight from the first
            # tick instead of a short-window warm-up artifact.
            self.window = VarianceWindow(self.config.n_max)
            for _ in range(self.config.n_max):
                self.window.push(np.zeros(6))


def control_step(
    ctrl: ControllerState,
    x_est: np.ndarray,
    variance_sample,
    x_ref: np.ndarray,
    planes,
) -> tuple[np.ndarray, NmpcSolution]:
    """One 20 Hz tick: update the variance window, derive weights, solve, and
    return the first input (held by the caller under zero-order hold)."""
    ctrl.window.push(variance_sample)
    if ctrl.adaptive:
        weights = entropy_weights(ctrl.window, ctrl.config.q_attitude)
    else:
        weights = AdaptiveWeights.fixed(ctrl.config.n_max, ctrl.config.q_attitude)
    solution = solve(
        x_est,
        x_ref,
        ctrl.u_prev,
        weights.qx,
        planes,
        ctrl.warm,
        ctrl.config,
        ctrl.params,
        initial_penalty=ctrl.warm_penalty,
        max_rounds=ctrl.config.penalty_rounds_per_tick,
    )
    u0 = solution.u_star[0].copy()
    ctrl.u_prev = u0
    # Shift-and-duplicate warm start for the next tick.  The penalty weight
    # stays sticky while constraints are active (re-escalating from scratch
    # every tick is what blows the solve-time budget) and decays one notch
    # only when a single round converged with slack.
    ctrl.warm = np.vstack([solution.u_star[1:], solution.u_star[-1:]])
    if solution.penalty_rounds == 1 and (
        solution.max_constraint_violation <= 0.5 * ctrl.config.constraint_tol
    ):
        ctrl.warm_penalty = max(
            ctrl.config.penalty_init, solution.final_penalty / ctrl.config.penalty_factor
        )
    elif solution.converged:
        ctrl.warm_penalty = solution.final_penalty
    else:
        v = solution.violations_per_round
        if len(v) >= 2 and v[-1] > 0.93 * v[-2]:
            # Escalation plateaued: the leftover violation is infeasible for
            # now (already inside d_s, or the estimate is corrupted).  Decay
            # a notch: a hard-capped weight would only act through plane-fit
            # imperfections and wreck the tracking terms, while the in-solve
            # escalation recovers the weight quickly whenever it helps again.
            ctrl.warm_penalty = max(
                ctrl.config.penalty_init, solution.final_penalty / ctrl.config.penalty_factor
            )
        else:
            # Round budget cut off a productive escalation: continue it on
            # the next tick.
            ctrl.warm_penalty = min(
                solution.final_penalty * ctrl.config.penalty_factor, ctrl.config.penalty_max
            )
    return u0, solution
