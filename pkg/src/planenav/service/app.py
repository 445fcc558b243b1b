"""HTTP service wrapping the core package.

Two operations are exposed: standalone plane segmentation of a posted point
cloud, and full closed-loop scenario execution returning the run metrics.
The CLI drives the same core entry points; this surface exists for
multi-client / remote use.
"""

from __future__ import annotations

import time

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..clustering import ClusteringError, segment_planes
from ..config import ConfigError
from ..geometry import BODY_FRAME, GeometryError, PointCloud
from ..sim import execute_scenario
from .models import (
    HealthResponse,
    MetricsModel,
    PlaneModel,
    RunRequest,
    RunResponse,
    SegmentRequest,
    SegmentResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(
        title="planenav",
        description="Plane segmentation and NMPC navigation runs as a service.",
        version=__version__,
    )

    @app.get("/healthz", response_model=HealthResponse)
    def healthz() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/segment", response_model=SegmentResponse)
    def segment(request: SegmentRequest) -> SegmentResponse:
        try:
            cloud = PointCloud(np.asarray(request.points, dtype=float), frame=BODY_FRAME)
        except GeometryError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        config = request.config.to_runtime(seed=request.seed)
        t0 = time.perf_counter()
        try:
            result = segment_planes(cloud, config)
        except (ClusteringError, GeometryError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        elapsed = time.perf_counter() - t0
        payload = result.to_json_dict()
        return SegmentResponse(
            labels=payload["labels"],
            planes=[PlaneModel(**p) for p in payload["planes"]],
            sampled_indices=payload["sampled_indices"],
            warnings=result.warnings,
            timing_s=elapsed,
        )

    @app.post("/run", response_model=RunResponse)
    def run(request: RunRequest) -> RunResponse:
        try:
            scenario = request.scenario.to_runtime(seed=request.seed, mode=request.mode)
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        try:
            trace, metrics = execute_scenario(scenario)
        except (ClusteringError, GeometryError) as exc:
            raise HTTPException(status_code=500, detail=f"run failed: {exc}") from exc
        return RunResponse(
            name=scenario.name,
            mode=scenario.mode,
            seed=scenario.seed,
            ticks=len(trace),
            sim_duration_s=len(trace) * scenario.model.ts,
            metrics=MetricsModel(**metrics.to_json_dict()),
        )

    return app


app = create_app()
