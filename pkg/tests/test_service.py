"""HTTP surface of the experiment service."""

from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from dilemma_lab.service import app


@pytest.fixture()
def client() -> TestClient:
    return TestClient(app, raise_server_exceptions=False)


def test_healthz(client):
    response = client.get("/healthz")
    assert response.status_code == 200
    assert response.json()["status"] == "ok"


def test_conditions_listing(client):
    assert client.get("/conditions").json()["conditions"] == [
        "full_curriculum", "scrambled", "direct_precursor", "control",
    ]


def test_run_mock_batch(client, tmp_path):
    response = client.post(
        "/run",
        json={
            "conditions": ["control"],
            "trials": 2,
            "seed": 7,
            "out_dir": str(tmp_path / "batch"),
        },
    )
    assert response.status_code == 200
    body = response.json()
    assert body["summary"]["conditions"]["control"]["completed"] == 2
    assert (tmp_path / "batch" / "summary.json").exists()
    assert len(list((tmp_path / "batch" / "trials").glob("*.jsonl"))) == 2


def test_run_unknown_condition_is_config_error(client, tmp_path):
    response = client.post(
        "/run", json={"conditions": ["bogus"], "out_dir": str(tmp_path)}
    )
    assert response.status_code == 400
    detail = response.json()["detail"]
    assert detail["kind"] == "config"


def test_run_scrambled_without_seed_is_config_error(client, tmp_path):
    response = client.post(
        "/run", json={"conditions": ["scrambled"], "out_dir": str(tmp_path)}
    )
    assert response.status_code == 400
    assert "seed" in response.json()["detail"]["message"]


def test_run_live_without_key_is_auth_error(client, tmp_path, monkeypatch):
    monkeypatch.delenv("DEEPINFRA_API_KEY", raising=False)
    monkeypatch.delenv("ANTHROPIC_API_KEY", raising=False)
    response = client.post(
        "/run",
        json={"conditions": ["control"], "mode": "live", "out_dir": str(tmp_path)},
    )
    assert response.status_code == 401
    assert response.json()["detail"]["kind"] == "auth"
    assert not (tmp_path / "trials").exists()  # failed before any game started


def test_mock_mode_rejects_llm_pool(client, tmp_path):
    config = {
        "pool": [
            {
                "agent_id": "m1",
                "kind": "llm",
                "endpoint": {
                    "provider_kind": "openai_compatible",
                    "model_id": "x",
                    "base_url": "https://example.test",
                    "api_key_env_var": "X",
                },
            }
        ]
    }
    response = client.post(
        "/run",
        json={"conditions": ["control"], "out_dir": str(tmp_path), "config": config},
    )
    assert response.status_code == 400
    assert "mock mode" in response.json()["detail"]["message"]


def test_request_shape_errors_are_422(client):
    response = client.post("/run", json={"trials": 0, "out_dir": "/tmp/x"})
    assert response.status_code == 422


def test_pilot_and_analyze_flow(client, tmp_path):
    run = client.post(
        "/pilot",
        json={
            "comm": True,
            "grouping": "coalition",
            "trials": 2,
            "rounds": 3,
            "seed": 11,
            "out_dir": str(tmp_path / "pilot"),
        },
    )
    assert run.status_code == 200
    label = "pilot_coalition_comm"
    assert run.json()["summary"]["conditions"][label]["completed"] == 2

    analyze = client.post(
        "/analyze",
        json={"in_dir": str(tmp_path / "pilot"), "out_dir": str(tmp_path / "out")},
    )
    assert analyze.status_code == 200
    body = analyze.json()
    assert "word_frequency" in body["csv_files"]
    assert body["conditions"][0]["condition"] == label

    validate = client.post("/validate", json={"in_dir": str(tmp_path / "pilot")})
    assert validate.status_code == 200
    assert validate.json() == {
        "ok": True,
        "checked_files": 2,
        "total_violations": 0,
        "violations": [],
    }


def test_analyze_empty_input_is_config_error(client, tmp_path):
    response = client.post(
        "/analyze", json={"in_dir": str(tmp_path / "nope"), "out_dir": str(tmp_path)}
    )
    assert response.status_code == 400
    assert response.json()["detail"]["kind"] == "config"


def test_validate_reports_corruption(client, tmp_path):
    run = client.post(
        "/run",
        json={
            "conditions": ["control"],
            "trials": 1,
            "seed": 3,
            "out_dir": str(tmp_path / "batch"),
        },
    )
    assert run.status_code == 200
    trial = next((tmp_path / "batch" / "trials").glob("*.jsonl"))
    lines = trial.read_text().splitlines()
    patched = []
    for line in lines:
        obj = json.loads(line)
        if obj["kind"] == "round" and obj["round"] == 4:
            obj["payoffs_tenths"][0] -= 7
        patched.append(json.dumps(obj, separators=(",", ":")))
    trial.write_text("\n".join(patched) + "\n")
    response = client.post("/validate", json={"in_dir": str(tmp_path / "batch")})
    body = response.json()
    assert body["ok"] is False
    assert body["total_violations"] >= 1
    assert any("round 4" in v for v in body["violations"])


def test_export_endpoint(client, tmp_path):
    client.post(
        "/run",
        json={"conditions": ["control"], "trials": 2, "seed": 1,
              "out_dir": str(tmp_path / "batch")},
    )
    client.post(
        "/analyze",
        json={"in_dir": str(tmp_path / "batch"), "out_dir": str(tmp_path / "analysis")},
    )
    response = client.post(
        "/export",
        json={
            "analysis_path": str(tmp_path / "analysis" / "analysis.json"),
            "out_dir": str(tmp_path / "export"),
        },
    )
    assert response.status_code == 200
    assert (tmp_path / "export" / "condition_stats.csv").exists()
