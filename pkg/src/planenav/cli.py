"""Command-line entry point: a thin client over the core package.

``run`` executes a scenario file and writes trace/metrics/plot files;
``segment`` runs standalone plane segmentation on a point-cloud CSV;
``serve`` starts the HTTP service.

Exit codes: 0 ok, 1 missing input file, 2 config/schema error, 3 collision
during the run, 4 solver hard failure, 5 insufficient input data.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_MISSING_FILE = 1
EXIT_CONFIG = 2
EXIT_COLLISION = 3
EXIT_SOLVER = 4
EXIT_INSUFFICIENT_DATA = 5

SCENARIO_ENV_VAR = "PLANENAV_SCENARIO"


def _write_plot_csvs(trace, out_dir: Path) -> None:
    plots = out_dir / "plots"
    plots.mkdir(parents=True, exist_ok=True)

    with open(plots / "trajectory.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "x", "y", "z", "ref_x", "ref_y", "ref_z"])
        for rec in trace.records:
            writer.writerow(
                [repr(float(v)) for v in (rec.t, *rec.true_state[:3], *rec.ref_position)]
            )

    with open(plots / "min_distance.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "min_panel_dist", "min_cloud_dist"])
        for rec in trace.records:
            writer.writerow(
                [repr(float(v)) for v in (rec.t, rec.min_panel_dist, rec.min_cloud_dist)]
            )

    with open(plots / "weights.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "w_px", "w_py", "w_pz", "w_vx", "w_vy", "w_vz"])
        for rec in trace.records:
            writer.writerow([repr(float(v)) for v in (rec.t, *rec.weights[:6])])


def cmd_run(args: argparse.Namespace) -> int:
    from .clustering import ClusteringError
    from .config import ConfigError, load_scenario
    from .geometry import GeometryError
    from .sim import execute_scenario

    scenario_path = os.environ.get(SCENARIO_ENV_VAR) or args.scenario
    if not scenario_path:
        print(
            f"error: no scenario given (argument or ${SCENARIO_ENV_VAR})", file=sys.stderr
        )
        return EXIT_CONFIG
    try:
        spec = load_scenario(scenario_path)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        scenario = spec.to_runtime(seed=args.seed, mode=args.mode)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    try:
        trace, metrics = execute_scenario(scenario)
    except (ClusteringError, GeometryError, np.linalg.LinAlgError) as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    trace.write_csv(out_dir / "trace.csv")
    trace.write_plane_snapshots(out_dir / "planes.json")
    metrics.write_json(out_dir / "metrics.json")
    _write_plot_csvs(trace, out_dir)

    print(f"scenario {scenario.name!r} ({scenario.mode}, seed {scenario.seed}): "
          f"{len(trace)} ticks, {len(trace) * scenario.model.ts:.1f} s simulated")
    for key, value in sorted(metrics.to_json_dict().items()):
        print(f"  {key}: {value}")
    if metrics.collision:
        print("collision detected", file=sys.stderr)
        return EXIT_COLLISION
    return EXIT_OK


def cmd_segment(args: argparse.Namespace) -> int:
    from .clustering import ClusteringConfig, InsufficientPointsError, ClusteringError, segment_planes
    from .config import ConfigError, load_clustering_config
    from .geometry import EmptyCloudError, GeometryError, PointCloud

    cloud_path = Path(args.cloud)
    if not cloud_path.exists():
        print(f"error: no such point-cloud file: {cloud_path}", file=sys.stderr)
        return EXIT_MISSING_FILE
    try:
        cloud = PointCloud.from_csv(cloud_path)
    except GeometryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT_DATA

    if args.config:
        try:
            config = load_clustering_config(args.config, seed=args.seed)
        except FileNotFoundError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_MISSING_FILE
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    else:
        config = ClusteringConfig(seed=args.seed)

    t0 = time.perf_counter()
    try:
        result = segment_planes(cloud, config)
    except (InsufficientPointsError, EmptyCloudError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT_DATA
    except (ClusteringError, GeometryError) as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    elapsed = time.perf_counter() - t0

    payload = result.to_json_dict()
    payload["timing"] = {"segmentation_s": elapsed}
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(
        f"segmented {len(cloud)} points into {len(result.planes)} plane(s) "
        f"in {elapsed * 1e3:.1f} ms -> {out_path}"
    )
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="planenav",
        description="Plane-segmentation-driven NMPC navigation: scenario runs, "
        "standalone segmentation, HTTP service.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a closed-loop scenario")
    p_run.add_argument(
        "scenario",
        nargs="?",
        help=f"scenario YAML file (falls back to ${SCENARIO_ENV_VAR})",
    )
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_run.add_argument(
        "--mode",
        default=None,
        choices=["adaptive", "fixed", "fixed-weights", "apf", "potential-field"],
        help="override the controller mode",
    )
    p_run.set_defaults(func=cmd_run)

    p_seg = sub.add_parser("segment", help="segment a point-cloud CSV into planes")
    p_seg.add_argument("cloud", help="point cloud CSV with header x,y,z")
    p_seg.add_argument("--config", default=None, help="clustering config YAML")
    p_seg.add_argument("--out", required=True, help="output JSON path")
    p_seg.add_argument("--seed", type=int, default=0, help="clustering seed")
    p_seg.set_defaults(func=cmd_segment)

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
