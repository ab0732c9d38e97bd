import pytest
from fastapi.testclient import TestClient

from app.main import app
from app.presets import preset_text


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json() == {"status": "ok"}


def test_run_experiment(client, quick_scenario_text):
    response = client.post(
        "/api/v1/experiments/runs",
        json={"scenario": quick_scenario_text("SdnShared"), "seeds": [1, 2], "duration": 30},
    )
    assert response.status_code == 200
    body = response.json()
    assert body["mode"] == "SdnShared"
    assert body["seeds"] == [1, 2]
    assert [run["seed"] for run in body["runs"]] == [1, 2]
    run = body["runs"][0]
    assert run["end_asn"] - run["warmup_end_asn"] == 3000
    assert {s["flow_class"] for s in run["flow_stats"]} == {"App", "Nsu", "Ftq", "SdnDown", "Control"}


def test_run_defaults_to_scenario_seed(client, quick_scenario_text):
    response = client.post(
        "/api/v1/experiments/runs", json={"scenario": quick_scenario_text("NoSdnRpl"), "duration": 10}
    )
    assert response.status_code == 200
    assert response.json()["seeds"] == [3]


def test_invalid_scenario_reports_line(client):
    response = client.post(
        "/api/v1/experiments/runs",
        json={"scenario": "mode = NoSdnRpl\n[topology]\nlink_quality = 1.2\n"},
    )
    assert response.status_code == 422
    detail = response.json()["detail"]
    assert detail["line"] == 3
    assert "link_quality" in detail["message"]


def test_request_validation(client):
    response = client.post("/api/v1/experiments/runs", json={"scenario": "mode = NoSdnRpl\n", "duration": -1})
    assert response.status_code == 422


def test_schedule_dump(client):
    response = client.post("/api/v1/experiments/schedule", json={"scenario": preset_text("SdnTracks")})
    assert response.status_code == 200
    body = response.json()
    assert body["slotframe_length"] == 61
    assert body["channel_count"] == 16
    assert "SH" in body["grid"] and "1>0" in body["grid"]


def test_schedule_dump_rejects_bad_scenario(client):
    response = client.post("/api/v1/experiments/schedule", json={"scenario": "mode = Mesh\n"})
    assert response.status_code == 422
    assert response.json()["detail"]["line"] == 1
