from __future__ import annotations

import time

import pytest
from fastapi.testclient import TestClient

from soctriage.config import AppConfig
from soctriage.ingest import generate_corpus
from soctriage.resolution import generate_tickets
from soctriage.service import create_app
from soctriage.store import Store


@pytest.fixture
def client(tmp_path):
    cfg = AppConfig(store_root=str(tmp_path / "store"))
    app = create_app(cfg)
    with TestClient(app) as test_client:
        yield test_client


def hot_events(n: int):
    """Events the mock trio will confidently mark critical."""
    events = generate_corpus(n, 1.0, seed=13)
    docs = []
    for event in events:
        doc = event.to_json()
        doc["magnitude"] = 9.5
        doc.pop("label", None)
        docs.append(doc)
    return docs


def wait_for_queue(client, minimum: int, timeout_s: float = 10.0):
    deadline = time.time() + timeout_s
    while time.time() < deadline:
        entries = client.get("/queue").json()["entries"]
        if len(entries) >= minimum:
            return entries
        time.sleep(0.02)
    raise AssertionError(f"queue never reached {minimum} entries")


class TestHealthAndLogs:
    def test_health(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json()["status"] == "ok"
        assert "version" in response.json()

    def test_post_logs_stores_and_detects_async(self, client):
        docs = hot_events(10)
        response = client.post("/logs", json={"events": docs})
        assert response.status_code == 200
        assert len(response.json()["accepted"]) == 10
        entries = wait_for_queue(client, 10)
        assert len(entries) == 10  # magnitude 9.5 + hostile text: all critical
        risks = [e["risk_score"] for e in entries]
        assert risks == sorted(risks, reverse=True)

    def test_verdict_lookup(self, client):
        docs = hot_events(1)
        client.post("/logs", json={"events": docs})
        wait_for_queue(client, 1)
        verdict = client.get(f"/verdicts/{docs[0]['id']}").json()
        assert verdict["ensemble_label"] is True
        assert len(verdict["votes"]) == 3

    def test_missing_verdict_404(self, client):
        assert client.get("/verdicts/ghost").status_code == 404

    def test_malformed_event_422(self, client):
        response = client.post("/logs", json={"events": [{"id": "x"}]})
        assert response.status_code == 422


class TestQueryEndpoints:
    def generate(self, client):
        response = client.post("/queries/generate", json={
            "platform": "qradar_aql",
            "question": "Find sources with many failed logins in the last day",
        })
        assert response.status_code == 200
        return response.json()

    def test_generate_and_fetch(self, client):
        record = self.generate(client)
        assert record["validation"]["passed"] is True
        fetched = client.get(f"/queries/{record['query_id']}").json()
        assert fetched["query_text"] == record["query_text"]

    def test_invalid_edit_rejected_not_persisted(self, client):
        record = self.generate(client)
        query_id = record["query_id"]
        response = client.post(f"/queries/{query_id}/decision", json={
            "action": "edit",
            "payload": {"query_text": "SELECT zzznotatoken FROM events"},
        })
        assert response.status_code == 422
        body = response.json()
        assert body["passed"] is False
        assert any(v["kind"] == "unknown_token" for v in body["violations"])
        unchanged = client.get(f"/queries/{query_id}").json()
        assert unchanged["query_text"] == record["query_text"]
        assert client.get("/decisions").json()["decisions"] == []

    def test_valid_edit_applies_and_revalidates(self, client):
        record = self.generate(client)
        query_id = record["query_id"]
        new_text = "SELECT destinationip FROM events LAST 1 DAYS"
        response = client.post(f"/queries/{query_id}/decision", json={
            "action": "edit", "payload": {"query_text": new_text},
        })
        assert response.status_code == 200
        assert response.json()["query_text"] == new_text
        assert response.json()["validation"]["passed"] is True

    def test_unknown_platform_rejected(self, client):
        response = client.post("/queries/generate", json={"platform": "splunk", "question": "x"})
        assert response.status_code == 422


class TestTicketEndpoints:
    def import_one(self, client):
        ticket = generate_tickets(1, seed=5)[0]
        response = client.post("/tickets", json={"tickets": [ticket.to_json()]})
        assert response.status_code == 200
        return ticket

    def test_resolve_and_override(self, client):
        ticket = self.import_one(client)
        resolved = client.post(f"/tickets/{ticket.ticket_id}/resolve", params={"setting": "no_sqm"})
        assert resolved.status_code == 200
        assert resolved.json()["output"]["code"]
        decision = client.post(f"/tickets/{ticket.ticket_id}/decision", json={
            "action": "override_code", "payload": {"code": "False Positive"},
        })
        assert decision.status_code == 200
        assert decision.json()["override_code"] == "FalsePositive"
        view = client.get(f"/tickets/{ticket.ticket_id}").json()
        assert view["resolutions"][-1]["override_code"] == "FalsePositive"
        assert len(view["decisions"]) == 1

    def test_invalid_override_code_422(self, client):
        ticket = self.import_one(client)
        client.post(f"/tickets/{ticket.ticket_id}/resolve", params={"setting": "no_sqm"})
        response = client.post(f"/tickets/{ticket.ticket_id}/decision", json={
            "action": "override_code", "payload": {"code": "Totally Fine"},
        })
        assert response.status_code == 422

    def test_decision_requires_resolution(self, client):
        ticket = self.import_one(client)
        response = client.post(f"/tickets/{ticket.ticket_id}/decision", json={
            "action": "accept", "payload": {},
        })
        assert response.status_code == 409

    def test_resolve_with_evidence_setting(self, client):
        client.post("/queries/generate", json={
            "platform": "qradar_aql",
            "question": "Find sources with many failed logins in the last day",
        })
        ticket = self.import_one(client)
        response = client.post(f"/tickets/{ticket.ticket_id}/resolve", params={"setting": "with_sqm"})
        assert response.status_code == 200
        assert response.json()["evidence_refs"] == ["q-0001"]

    def test_ground_truth_never_mutated(self, client):
        ticket = self.import_one(client)
        client.post(f"/tickets/{ticket.ticket_id}/resolve", params={"setting": "no_sqm"})
        client.post(f"/tickets/{ticket.ticket_id}/decision", json={
            "action": "override_code", "payload": {"code": "FalsePositive"},
        })
        view = client.get(f"/tickets/{ticket.ticket_id}").json()
        assert view["ticket"]["ground_truth_code"] == ticket.ground_truth_code.value


class TestReplayEquivalence:
    def test_restart_reproduces_api_state(self, tmp_path):
        cfg = AppConfig(store_root=str(tmp_path / "store"))
        with TestClient(create_app(cfg)) as client:
            client.post("/logs", json={"events": hot_events(3)})
            wait_for_queue(client, 3)
            record = client.post("/queries/generate", json={
                "platform": "qradar_aql",
                "question": "Find sources with many failed logins in the last day",
            }).json()
            client.post(f"/queries/{record['query_id']}/decision", json={
                "action": "edit",
                "payload": {"query_text": "SELECT destinationip FROM events LAST 1 DAYS"},
            })
            before_queue = client.get("/queue").json()["entries"]
            before_query = client.get(f"/queries/{record['query_id']}").json()

        with TestClient(create_app(AppConfig(store_root=str(tmp_path / "store")))) as client:
            assert client.get("/queue").json()["entries"] == before_queue
            after_query = client.get(f"/queries/{record['query_id']}").json()
            assert after_query == before_query
            assert after_query["query_text"] == "SELECT destinationip FROM events LAST 1 DAYS"
