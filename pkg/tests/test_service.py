import numpy as np
import pytest
import yaml
from fastapi.testclient import TestClient

from feelsched.service import create_app

from test_suite import SMALL_CONFIG


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


class TestHealth:
    def test_ok(self, client):
        resp = client.get("/health")
        assert resp.status_code == 200
        assert resp.json() == {"status": "ok"}


class TestValidate:
    def test_accepts_default_config(self, client):
        cfg = yaml.safe_load(open("configs/default.yaml"))
        resp = client.post("/config/validate", json=cfg)
        assert resp.status_code == 200
        assert resp.json()["epsilon"] == 1e-3

    def test_rejects_unknown_key(self, client):
        cfg = dict(SMALL_CONFIG, frobnicate=1)
        assert client.post("/config/validate", json=cfg).status_code == 422

    def test_rejects_bad_value(self, client):
        cfg = yaml.safe_load(open("configs/default.yaml"))
        cfg["epsilon"] = -1.0
        assert client.post("/config/validate", json=cfg).status_code == 422


class TestRuns:
    def test_run_and_replies_consistent(self, client):
        resp = client.post("/runs", json={
            "config": SMALL_CONFIG, "policy": "uniform", "seed": 0,
        })
        assert resp.status_code == 200
        data = resp.json()
        assert data["policy"] == "uniform" and data["seed"] == 0
        assert data["rounds"] == len(data["logs"])
        assert data["logs"][-1]["cum_s"] == pytest.approx(data["total_time_s"])
        if data["converged"]:
            assert data["logs"][-1]["gap"] <= SMALL_CONFIG["epsilon"]

    def test_run_is_deterministic(self, client):
        body = {"config": SMALL_CONFIG, "policy": "ctm", "seed": 3}
        r1 = client.post("/runs", json=body).json()
        r2 = client.post("/runs", json=body).json()
        assert r1 == r2

    def test_unknown_policy(self, client):
        resp = client.post("/runs", json={
            "config": SMALL_CONFIG, "policy": "greedy", "seed": 0,
        })
        assert resp.status_code == 422


class TestSchedule:
    def test_uniform(self, client):
        resp = client.post("/schedule", json={
            "policy": "uniform", "gradient_norms": [1, 2, 3],
            "dataset_sizes": [10, 10, 10],
        })
        assert resp.status_code == 200
        assert resp.json()["probabilities"] == pytest.approx([1 / 3] * 3)

    def test_ia(self, client):
        resp = client.post("/schedule", json={
            "policy": "ia", "gradient_norms": [1.0, 3.0],
            "dataset_sizes": [30, 10],
        })
        assert resp.json()["probabilities"] == pytest.approx([0.5, 0.5])

    def test_ia_all_zero_conflict(self, client):
        resp = client.post("/schedule", json={
            "policy": "ia", "gradient_norms": [0.0, 0.0],
            "dataset_sizes": [1, 1],
        })
        assert resp.status_code == 409

    def test_ca_requires_upload_times(self, client):
        resp = client.post("/schedule", json={
            "policy": "ca", "gradient_norms": [1, 1], "dataset_sizes": [1, 1],
        })
        assert resp.status_code == 422
        resp = client.post("/schedule", json={
            "policy": "ca", "gradient_norms": [1, 1], "dataset_sizes": [1, 1],
            "upload_s": [2.0, 0.5],
        })
        assert resp.json()["probabilities"] == [0.0, 1.0]

    def test_ctm_requires_bound_fields(self, client):
        resp = client.post("/schedule", json={
            "policy": "ctm", "gradient_norms": [1, 1], "dataset_sizes": [1, 1],
            "upload_s": [1.0, 2.0],
        })
        assert resp.status_code == 422

    def test_ctm_returns_diagnostics_and_valid_distribution(self, client):
        resp = client.post("/schedule", json={
            "policy": "ctm", "gradient_norms": [1.0, 2.0, 0.5],
            "dataset_sizes": [10, 20, 30], "upload_s": [1.0, 3.0, 0.5],
            "ell": 2.0, "mu": 1.0, "epsilon": 1e-3, "chi": 1.0, "nu": 4.0,
            "t": 5, "t_future": 1.5,
        })
        assert resp.status_code == 200
        data = resp.json()
        p = np.array(data["probabilities"])
        assert abs(p.sum() - 1.0) < 1e-9
        assert np.all(p > 0)
        assert data["rho"] > 0
        assert data["lambda"] is not None
