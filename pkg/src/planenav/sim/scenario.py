"""Closed-loop scenario execution.

Per tick: (re)scan and segment at the perception rate, inject odometry noise,
run the selected controller, log, then advance the true dynamics.  The whole
loop is a pure function of (scenario, seed): all randomness flows from one
seed sequence, and wall-clock measurements never touch logged data.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..clustering import ClusteringConfig, ClusteringError, segment_planes
from ..dynamics import ModelParams, step_euler_vec
from ..geometry import BODY_FRAME, Plane, PointCloud
from ..nmpc import (
    AdaptiveWeights,
    ControllerState,
    NmpcConfig,
    constraint_relevant_planes,
    control_step,
    entropy_weights,
)
from .environment import Environment
from .lidar import LidarConfig, synthetic_scan
from .metrics import Metrics, compute_metrics
from .noise import NoiseConfig, OdometryNoise
from .potential_field import PotentialFieldGains, potential_field_step
from .reference import ReferenceTrack
from .trace import RunTrace, TickRecord

log = logging.getLogger(__name__)

MODE_ADAPTIVE = "adaptive"
MODE_FIXED = "fixed"
MODE_APF = "apf"
MODES = (MODE_ADAPTIVE, MODE_FIXED, MODE_APF)

WAYPOINT_CAPTURE_RADIUS = 0.3


@dataclass
class ScenarioConfig:
    """Everything a run needs, bundled: world, sensors, model, controllers."""

    name: str
    environment: Environment
    lidar: LidarConfig = field(default_factory=LidarConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    model: ModelParams = field(default_factory=ModelParams)
    clustering: ClusteringConfig = field(default_factory=ClusteringConfig)
    nmpc: NmpcConfig = field(default_factory=NmpcConfig)
    potential_field: PotentialFieldGains = field(default_factory=PotentialFieldGains)
    mode: str = MODE_ADAPTIVE
    seed: int = 0
    segmentation_rate_hz: float = 10.0
    segmentation_range_m: float = 5.0
    plane_support_gap_m: float = 0.75
    time_limit_s: float = 120.0

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.segmentation_rate_hz <= 0:
            raise ValueError("segmentation rate must be positive")
        if self.segmentation_range_m <= 0:
            raise ValueError("segmentation range must be positive")
        if self.time_limit_s <= 0:
            raise ValueError("time limit must be positive")
        if self.nmpc.ts != self.model.ts:
            raise ValueError("nmpc and model sampling periods must agree")


@dataclass
class _SolverDiag:
    cost: float = 0.0
    violation: float = 0.0
    rounds: int = 0
    iters: int = 0
    converged: bool = True


def run_scenario(scenario: ScenarioConfig, seed: int | None = None) -> RunTrace:
    """Execute the closed loop and return the full trace.

    Controller non-convergence is logged and the best iterate applied (the
    real-time contract); a collision only sets the metric flag, the run keeps
    logging until the waypoint capture or the time limit.
    """
    env = scenario.environment
    ts = scenario.model.ts
    run_seed = scenario.seed if seed is None else seed
    ss = np.random.SeedSequence(run_seed)
    ss_scan, ss_noise, ss_cluster = ss.spawn(3)
    rng_scan = np.random.default_rng(ss_scan)
    rng_noise = np.random.default_rng(ss_noise)
    cluster_seed_base = int(ss_cluster.generate_state(1)[0] % (2**31))

    track = ReferenceTrack(env.spawn, env.waypoints)
    noise_model = OdometryNoise(scenario.noise)
    ctrl = ControllerState(
        config=scenario.nmpc,
        params=scenario.model,
        adaptive=scenario.mode == MODE_ADAPTIVE,
    )

    seg_every = max(1, int(round(1.0 / (scenario.segmentation_rate_hz * ts))))
    max_ticks = int(np.ceil(scenario.time_limit_s / ts))

    trace = RunTrace(scenario_name=scenario.name, ts=ts)
    true = np.zeros(8)
    true[:3] = env.spawn
    u_applied = np.array([scenario.model.g, 0.0, 0.0])
    planes: list[Plane] = []
    cloud_pts = np.zeros((0, 3))
    min_cloud_dist = float("inf")
    scan_index = 0

    spawn_clearance = env.min_panel_distance(env.spawn)
    if spawn_clearance <= scenario.nmpc.d_s:
        log.info(
            "spawn clearance %.2f m is within the safety distance %.2f m",
            spawn_clearance,
            scenario.nmpc.d_s,
        )

    for tick in range(max_ticks):
        t = tick * ts

        if tick % seg_every == 0:
            cloud = synthetic_scan(env, true, scenario.lidar, rng_scan)
            cloud_pts = cloud.points
            min_cloud_dist = (
                float(np.min(np.linalg.norm(cloud_pts, axis=1))) if len(cloud) else float("inf")
            )
            # Segmentation consumes the local crop: collision constraints only
            # need nearby geometry, and a bounded coordinate scale keeps the
            # sparse-coding threshold in its working regime.
            ranges = np.linalg.norm(cloud_pts, axis=1) if len(cloud) else np.zeros(0)
            local = cloud_pts[ranges <= scenario.segmentation_range_m]
            cloud = PointCloud(local, frame=BODY_FRAME)
            if len(cloud) >= int(np.ceil(3.0 / scenario.clustering.kappa1)):
                cfg = ClusteringConfig(
                    **{
                        **scenario.clustering.__dict__,
                        "seed": (cluster_seed_base + scan_index) % (2**31),
                    }
                )
                t_seg = time.perf_counter()
                try:
                    result = segment_planes(cloud, cfg)
                    planes = constraint_relevant_planes(
                        result.planes, cloud.points, scenario.plane_support_gap_m
                    )
                    trace.plane_snapshots[tick] = planes
                except ClusteringError as exc:
                    log.warning("segmentation failed at tick %d: %s; keeping snapshot", tick, exc)
                trace.segmentation_walltimes_s.append(time.perf_counter() - t_seg)
            else:
                planes = []
                trace.plane_snapshots[tick] = planes
            scan_index += 1

        est, var_sample = noise_model.step(
            true, rng_noise, t, u_applied=u_applied, params=scenario.model
        )
        ref_pos, ref_vel = track.state_at(t)
        x_ref = np.concatenate([ref_pos, ref_vel, [0.0, 0.0]])

        diag = _SolverDiag()
        if scenario.mode == MODE_APF:
            u = potential_field_step(
                est,
                cloud_pts,
                ref_pos,
                scenario.potential_field,
                scenario.model,
                scenario.nmpc.u_min,
                scenario.nmpc.u_max,
            )
            ctrl.window.push(var_sample)
            weights = entropy_weights(ctrl.window, scenario.nmpc.q_attitude)
            trace.solve_walltimes_s.append(0.0)
        else:
            t_solve = time.perf_counter()
            u, solution = control_step(ctrl, est, var_sample, x_ref, planes)
            trace.solve_walltimes_s.append(time.perf_counter() - t_solve)
            if not solution.converged:
                log.debug(
                    "tick %d: applying flagged solution (violation %.3f m)",
                    tick,
                    solution.max_constraint_violation,
                )
            diag = _SolverDiag(
                cost=solution.cost,
                violation=solution.max_constraint_violation,
                rounds=solution.penalty_rounds,
                iters=solution.inner_iterations,
                converged=solution.converged,
            )
            weights = (
                entropy_weights(ctrl.window, scenario.nmpc.q_attitude)
                if ctrl.adaptive
                else AdaptiveWeights.fixed(scenario.nmpc.n_max, scenario.nmpc.q_attitude)
            )

        trace.records.append(
            TickRecord(
                tick=tick,
                t=t,
                true_state=true.copy(),
                est_state=est,
                u=np.asarray(u, dtype=float),
                weights=weights.qx.copy(),
                ref_position=ref_pos,
                ref_velocity=ref_vel,
                active_waypoint=track.segment_at(t),
                n_planes=len(planes),
                nmpc_cost=diag.cost,
                nmpc_violation=diag.violation,
                nmpc_rounds=diag.rounds,
                nmpc_iters=diag.iters,
                nmpc_converged=diag.converged,
                min_panel_dist=env.min_panel_distance(true[:3]),
                min_cloud_dist=min_cloud_dist,
            )
        )

        # Hover missions (no waypoints, or all at the spawn) run to the time
        # limit; traveling missions end at final-waypoint capture.
        if (
            env.waypoints
            and track.duration > 0
            and t >= track.duration
            and float(np.linalg.norm(true[:3] - track.final_position)) <= WAYPOINT_CAPTURE_RADIUS
        ):
            break

        u_applied = np.asarray(u, dtype=float)
        true = step_euler_vec(true, u_applied, scenario.model)

    return trace


def execute_scenario(scenario: ScenarioConfig, seed: int | None = None) -> tuple[RunTrace, Metrics]:
    trace = run_scenario(scenario, seed=seed)
    return trace, compute_metrics(trace, scenario.environment)
