from __future__ import annotations

import warnings

import pytest

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    from fastapi.testclient import TestClient

from creditnet.model import CreditNetwork
from creditnet.service.app import app


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


class TestHealth:
    def test_health(self, client):
        data = client.get("/health").json()
        assert data["status"] == "ok"


class TestGenerate:
    def test_generate_round_trips(self, client):
        resp = client.post("/network/generate", json={"nodes": 40, "seed": 3})
        assert resp.status_code == 200
        data = resp.json()
        net = CreditNetwork.from_text(data["graph"])
        assert net.node_count() == data["nodes"] == 40
        assert len(net.links) == data["links"]

    def test_generate_deterministic(self, client):
        a = client.post("/network/generate", json={"nodes": 40, "seed": 3}).json()
        b = client.post("/network/generate", json={"nodes": 40, "seed": 3}).json()
        assert a["graph"] == b["graph"]

    def test_generate_validation(self, client):
        assert client.post("/network/generate", json={"nodes": 1}).status_code == 422


class TestScenarioRun:
    def test_prefix_rows(self, client):
        resp = client.post("/scenario/run",
                           json={"scenario": "prefix-bt", "nodes": 60, "seed": 2})
        assert resp.status_code == 200
        data = resp.json()
        assert [m["op"] for m in data["metrics"]] == [
            "Setup", "Broadcast BT", "FindRoute", "FindRoute and Response"]
        assert data["links_established"] == len(data["ledger"])
        assert data["requestor"] is not None

    def test_config_text_honored(self, client):
        config = "nodes = 30\nseed = 5\nbt_amount = 60\n"
        resp = client.post("/scenario/run",
                           json={"scenario": "prefix-bt", "config": config})
        assert resp.status_code == 200
        assert resp.json()["nodes"] == 30

    def test_flags_override_config(self, client):
        config = "nodes = 30\nseed = 5\n"
        resp = client.post("/scenario/run",
                           json={"scenario": "prefix-bt", "nodes": 44,
                                 "config": config})
        assert resp.json()["nodes"] == 44

    def test_bailout_reports_fee(self, client):
        resp = client.post("/scenario/run",
                           json={"scenario": "bailout", "nodes": 60, "seed": 2})
        data = resp.json()
        assert data["landmark_fee"] is not None
        assert data["bailout_failed"] in (True, False)

    def test_unknown_scenario_rejected(self, client):
        resp = client.post("/scenario/run", json={"scenario": "teleport"})
        assert resp.status_code == 422

    def test_bad_config_rejected(self, client):
        resp = client.post("/scenario/run",
                           json={"scenario": "prefix-bt", "config": "wat = 1"})
        assert resp.status_code == 422


class TestAuditRun:
    def test_clean_run(self, client):
        resp = client.post("/audit/run",
                           json={"scenario": "prefix-bt", "nodes": 60, "seed": 2})
        data = resp.json()
        assert data["clean"] is True
        assert data["findings"] == []

    def test_findings_surface(self, client):
        probe = client.post("/scenario/run",
                            json={"scenario": "prefix-bt", "nodes": 80, "seed": 4})
        # make a contract party misreport: the user field of the first entry
        user = probe.json()["ledger"][0].split("|")[5]
        config = f"corrupt = {user} misreport-link\n"
        resp = client.post("/audit/run",
                           json={"scenario": "prefix-bt", "nodes": 80, "seed": 4,
                                 "config": config})
        data = resp.json()
        assert data["clean"] is False
        assert any(user in f["suspects"] for f in data["findings"])
