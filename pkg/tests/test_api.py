"""
Tests for the HTTP surface
"""

import pytest
from fastapi.testclient import TestClient

from spectrum_mdl import config as settings
from spectrum_mdl.main import app


@pytest.fixture
def client(tmp_path, monkeypatch):
    monkeypatch.setattr(settings, "OUTPUT_ROOT", tmp_path)
    return TestClient(app)


def test_health(client):
    response = client.get("/health")

    assert response.status_code == 200
    assert response.json() == {"status": "healthy", "service": "spectrum-mdl-api"}


def test_root_lists_endpoints(client):
    assert "runs" in client.get("/").json()["endpoints"]


def test_dominant_ratio(client):
    response = client.post("/api/v1/dominant-ratio", json={"counts": {"{2,3}": 5000, "{2,9}": 5000}, "p0": 0.99})

    assert response.status_code == 200
    body = response.json()
    assert body["n0"] == 8
    assert body["delta"] == "1250"
    assert body["m"] == 2


def test_dominant_ratio_rejects_empty_counts(client):
    response = client.post("/api/v1/dominant-ratio", json={"counts": {}})

    assert response.status_code == 422


def test_dominant_ratio_rejects_bad_label(client):
    response = client.post("/api/v1/dominant-ratio", json={"counts": {"{a}": 3}})

    assert response.status_code == 400


def test_dataset_upload(client, tmp_path):
    files = {"file": ("points.csv", b"x1,x2\n1.0,2.0\n3.0,4.0\n", "text/csv")}

    response = client.post("/api/v1/datasets", files=files)

    assert response.status_code == 200
    body = response.json()
    assert (body["n_points"], body["dimension"]) == (2, 2)
    assert body["path"].startswith(str(tmp_path / "datasets"))


def test_dataset_upload_rejects_other_types(client):
    files = {"file": ("points.txt", b"x1\n1.0\n", "text/plain")}

    assert client.post("/api/v1/datasets", files=files).status_code == 400


def test_malformed_dataset_is_rejected_and_removed(client, tmp_path):
    files = {"file": ("points.csv", b"a,b\n1,2\n", "text/csv")}

    response = client.post("/api/v1/datasets", files=files)

    assert response.status_code == 400
    assert list((tmp_path / "datasets").iterdir()) == []


def test_run_and_fetch_artifacts(client, small_config):
    response = client.post("/api/v1/runs", json=small_config.model_dump(mode="json"))

    assert response.status_code == 200
    body = response.json()
    assert body["exit_code"] in (0, 2, 3)

    manifest = client.get(f"/api/v1/runs/{body['run_id']}/manifest.json")
    assert manifest.status_code == 200
    assert manifest.json()["exit_code"] == body["exit_code"]

    svg = client.get(f"/api/v1/runs/{body['run_id']}/codes.svg")
    assert svg.headers["content-type"].startswith("image/svg+xml")


def test_run_with_missing_custom_data_is_a_client_error(client, small_config, tmp_path):
    payload = small_config.model_dump(mode="json")
    payload["dataset"] = {"kind": "custom", "path": str(tmp_path / "datasets" / "absent.csv")}

    response = client.post("/api/v1/runs", json=payload)

    assert response.status_code == 400
    assert "data" in response.json()["detail"]


def test_run_rejects_data_outside_upload_directory(client, small_config, tmp_path, tmp_path_factory):
    outside = tmp_path_factory.mktemp("elsewhere") / "points.csv"
    outside.write_text("x1,x2\n1.0,2.0\n")
    payload = small_config.model_dump(mode="json")
    payload["dataset"] = {"kind": "custom", "path": str(outside)}

    response = client.post("/api/v1/runs", json=payload)

    assert response.status_code == 403
    assert list(tmp_path.iterdir()) == []


def test_invalid_run_config(client):
    assert client.post("/api/v1/runs", json={"U": -1}).status_code == 422


def test_missing_artifact(client):
    assert client.get("/api/v1/runs/nope/manifest.json").status_code == 404
