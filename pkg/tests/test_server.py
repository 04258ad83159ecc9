import pytest
from fastapi.testclient import TestClient

from channel_model import Link
from qds_server import app, counts_from_rows, json_safe
from sample_datasets import field_run_counts


@pytest.fixture
def client():
    return TestClient(app)


def _rows(counts_by_link):
    return [
        {"link": link.value, "basis": basis.value, "intensity": intensity.value, "n": n, "m": m}
        for link, counts in counts_by_link.items()
        for basis, intensity, n, m in counts.cells()
    ]


FIELD_DEVICE = {"mu": 0.37, "nu": 0.068, "p_mu": 0.95, "p_z_tx": 0.979, "p_z_rx": 0.979}


def test_context_lists_tables_and_budget(client):
    body = client.post("/v1/context").json()
    assert [t["name"] for t in body["tables"]] == ["counts", "source", "device", "security"]
    assert len(body["budget_uses"]) == 10
    assert body["default_config"]["target_psec"] == 2e-4


def test_estimate_from_rows(client, counts_50km):
    response = client.post("/v1/estimate", json={
        "counts": _rows(counts_50km), "config": FIELD_DEVICE, "distance_km": 50,
    })
    body = response.json()
    assert "error" not in body
    assert body["p_sec"] <= 2e-4
    assert body["L"] % 2 == 0
    assert body["s_alpha"] < body["s_upsilon"]
    assert body["rate_bits_per_s"] > 0


def test_estimate_with_fixed_block_length(client):
    response = client.post("/v1/estimate", json={
        "counts": _rows(field_run_counts(103).counts), "config": FIELD_DEVICE,
        "distance_km": 103, "block_length": 51022,
    })
    body = response.json()
    assert body["L"] == 51022
    assert body["time_per_bit_s"] == pytest.approx(1.0027, rel=0.01)


def test_estimate_needs_counts(client):
    assert client.post("/v1/estimate", json={}).json() == {"error": "No counts provided"}


def test_estimate_reports_bad_counts(client, counts_50km):
    rows = _rows(counts_50km)
    rows[0]["m"] = rows[0]["n"] + 1
    body = client.post("/v1/estimate", json={"counts": rows, "config": FIELD_DEVICE}).json()
    assert body["error"].startswith("Estimation error")


def test_evaluate_beyond_cutoff(client):
    body = client.post("/v1/evaluate", json={"config": FIELD_DEVICE, "distance_km": 500}).json()
    assert body["feasible"] is False
    assert body["rate"] == 0.0
    assert body["p_sec"] is None


def test_counts_from_rows_requires_every_cell(counts_50km):
    rows = _rows(counts_50km)
    assert counts_from_rows(rows)[Link.BOB_ALICE] == counts_50km[Link.BOB_ALICE]
    with pytest.raises(ValueError, match="needs 4"):
        counts_from_rows(rows[1:])


def test_json_safe():
    assert json_safe({"a": [float("inf"), 1.0], "b": float("nan")}) == {"a": [None, 1.0], "b": None}
