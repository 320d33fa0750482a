import pytest
from fastapi.testclient import TestClient

from ecopanda import __version__
from ecopanda.graphnet import generate_graph_sequence, sequence_hash
from ecopanda.service import create_app

SMALL = "n = 4\np = 2\nd = 3\nhorizon = 200\niters = 200\npi = 0.6\nc_eco = 0.01\neta_eco = 0.8\n"


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def test_health_reports_version(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok", "version": __version__}


def test_run_endpoint_full_cycle(client, tmp_path):
    resp = client.post("/run", json={"config_text": SMALL, "output_dir": str(tmp_path / "o")})
    assert resp.status_code == 200
    body = resp.json()
    assert body["output_dir"] == str(tmp_path / "o")
    assert len(body["manifest"]) == 6
    assert (tmp_path / "o" / "plot.svg").exists()
    assert body["mu"] > 0 and body["L"] >= body["mu"]
    assert body["window_b"] >= 1
    assert 0.0 <= body["window_delta"] < 1.0
    assert any(line.startswith("c_max=") for line in body["constants_lines"])
    assert [s["method"] for s in body["summaries"]] == ["eco_panda", "panda", "diging"]
    assert body["diverged_methods"] == []
    # The theory-consistency notices ride along in the response body.
    assert any("cbar" in w for w in body["warnings"])
    seq = generate_graph_sequence(4, 0.6, 200, seed=1)
    assert body["graph_sha256"] == sequence_hash(seq)


def test_run_endpoint_sanitizes_unfittable_rates(client, tmp_path):
    # 40 iterations is below the fitting window, so rates come back null.
    resp = client.post("/run", json={
        "config_text": "n = 3\nhorizon = 40\niters = 40\npi = 1.0\nmethods = eco_panda\nc_eco = 0.01\neta_eco = 1.0",
        "output_dir": str(tmp_path / "o")})
    assert resp.status_code == 200
    body = resp.json()
    assert body["summaries"][0]["lambda_emp"] is None
    assert body["summaries"][0]["r_squared"] is None


def test_run_endpoint_rejects_bad_config(client):
    resp = client.post("/run", json={"config_text": "pi = 1.5"})
    assert resp.status_code == 422
    assert "pi" in resp.json()["detail"]
    resp = client.post("/run", json={"config_text": "bogus_key = 3"})
    assert resp.status_code == 422


def test_constants_endpoint_worked_example(client):
    resp = client.post("/constants", json={"mu": 1.0, "L": 2.0, "eta": 8.0, "b": 1, "delta": 0.5})
    assert resp.status_code == 200
    body = resp.json()
    assert "C=0.010606441598723816" in body["lines"]
    assert "c_max=0.0013258051998404771" in body["lines"]
    # Both published closed forms sit outside their bands on this example.
    assert len(body["warnings"]) == 2


def test_constants_endpoint_defaults_eta(client):
    resp = client.post("/constants", json={"mu": 0.5, "L": 1.0, "b": 2, "delta": 0.3})
    assert resp.status_code == 200
    assert "eta=4" in resp.json()["lines"]


def test_constants_endpoint_rejects_bad_inputs(client):
    resp = client.post("/constants", json={"mu": 3.0, "L": 2.0, "b": 1, "delta": 0.5})
    assert resp.status_code == 422
    assert "mu" in resp.json()["detail"]
    resp = client.post("/constants", json={"mu": 1.0, "L": 2.0, "b": 1, "delta": 1.0})
    assert resp.status_code == 422


def test_verify_graph_endpoint(client):
    resp = client.post("/verify-graph", json={"config_text": "n = 4\nhorizon = 120\npi = 0.7"})
    assert resp.status_code == 200
    body = resp.json()
    assert body["n"] == 4
    assert body["horizon"] == 120
    assert body["support_ok"] is True
    assert body["doubly_stochastic_ok"] is True
    assert body["max_stochasticity_violation"] <= 1e-12
    assert body["contracts"] is True
    assert body["window_b"] >= 1
    seq = generate_graph_sequence(4, 0.7, 120, seed=1)
    assert body["graph_sha256"] == sequence_hash(seq)


def test_verify_graph_reports_non_contracting_sequence(client):
    resp = client.post("/verify-graph", json={"config_text": "n = 3\nhorizon = 30\npi = 0.0"})
    assert resp.status_code == 200
    body = resp.json()
    assert body["contracts"] is False
    assert body["window_b"] is None
    assert body["window_delta"] is None


def test_verify_graph_rejects_bad_config(client):
    resp = client.post("/verify-graph", json={"config_text": "n = 0"})
    assert resp.status_code == 422
