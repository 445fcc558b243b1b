import numpy as np
import pytest
from fastapi.testclient import TestClient

from planenav.service import create_app

from conftest import make_wall_cloud


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def test_healthz(client):
    resp = client.get("/healthz")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"
    assert "version" in body


def test_segment_endpoint_three_walls(client):
    rng = np.random.default_rng(0)
    cloud, _, _ = make_wall_cloud(rng, 334, noise_std=0.01)
    resp = client.post(
        "/segment",
        json={
            "points": cloud.points.tolist(),
            "config": {"n_cluster": 3, "lambda": 0.15},
            "seed": 0,
        },
    )
    assert resp.status_code == 200
    body = resp.json()
    assert len(body["planes"]) == 3
    assert len(body["labels"]) == len(body["sampled_indices"]) == 200
    assert body["timing_s"] > 0
    for plane in body["planes"]:
        n = np.array([plane["alpha"], plane["beta"], plane["gamma"]])
        assert np.linalg.norm(n) == pytest.approx(1.0, abs=1e-9)


def test_segment_endpoint_rejects_too_few_points(client):
    resp = client.post("/segment", json={"points": [[0, 0, 0], [1, 1, 1]]})
    assert resp.status_code == 422


def test_segment_endpoint_rejects_unknown_config_key(client):
    resp = client.post(
        "/segment",
        json={"points": [[0, 0, 0]] * 40, "config": {"n_cluster": 2, "bogus": 1}},
    )
    assert resp.status_code == 422


def test_run_endpoint_quick_scenario(client):
    scenario = {
        "name": "svc-room",
        "seed": 5,
        "time_limit_s": 1.0,
        "segmentation_rate_hz": 2.0,
        "environment": {"preset": "confined_room"},
        "lidar": {"horizontal_resolution_deg": 6.0},
        "clustering": {"n_cluster": 6, "lambda": 0.5},
        "nmpc": {"horizon": 15},
    }
    resp = client.post("/run", json={"scenario": scenario})
    assert resp.status_code == 200
    body = resp.json()
    assert body["name"] == "svc-room"
    assert body["ticks"] == 20
    assert body["metrics"]["collision"] is False
    assert body["metrics"]["min_obstacle_distance_m"] > 1.0


def test_run_endpoint_mode_override_and_validation(client):
    scenario = {
        "name": "svc-room",
        "time_limit_s": 0.5,
        "environment": {"preset": "confined_room"},
        "lidar": {"horizontal_resolution_deg": 8.0},
        "clustering": {"n_cluster": 5, "lambda": 0.5},
        "nmpc": {"horizon": 10},
    }
    ok = client.post("/run", json={"scenario": scenario, "mode": "apf", "seed": 2})
    assert ok.status_code == 200
    assert ok.json()["mode"] == "apf"
    assert ok.json()["seed"] == 2

    bad = dict(scenario)
    bad["unknown_key"] = True
    resp = client.post("/run", json={"scenario": bad})
    assert resp.status_code == 422
