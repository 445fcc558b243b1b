"""Request/response models for the HTTP service."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from ..config import ClusteringSection, ScenarioSpec


class PlaneModel(BaseModel):
    alpha: float
    beta: float
    gamma: float
    zeta: float


class SegmentRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    points: list[tuple[float, float, float]] = Field(min_length=1)
    config: ClusteringSection = Field(default_factory=ClusteringSection)
    seed: int = 0


class SegmentResponse(BaseModel):
    labels: list[int]
    planes: list[PlaneModel]
    sampled_indices: list[int]
    warnings: list[str]
    timing_s: float


class RunRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: ScenarioSpec
    seed: Optional[int] = None
    mode: Optional[str] = None


class MetricsModel(BaseModel):
    waypoint_mae_m: float
    velocity_mae_mps: float
    path_length_m: float
    min_obstacle_distance_m: Optional[float]
    collision: bool


class RunResponse(BaseModel):
    name: str
    mode: str
    seed: int
    ticks: int
    sim_duration_s: float
    metrics: MetricsModel


class HealthResponse(BaseModel):
    status: str
    version: str
