"""Gateway REST/SSE contracts over the virtual-clock harness."""

from __future__ import annotations

import base64

import pytest
from fastapi.testclient import TestClient

from guidefleet.core.types import RobotKind
from guidefleet.gateway.api import create_app
from tests.conftest import make_harness


@pytest.fixture
def ready(tmp_path):
    """Harness with one reception and two idle, fresh guide robots."""
    harness = make_harness(tmp_path)
    harness.add_robot("r01", kind=RobotKind.RECEPTION, seed=50)
    harness.add_robot("g01", seed=1, task_durations={"pickup": (2, 2), "guide": (4, 4), "return": (3, 3)})
    harness.add_robot("g02", seed=2, task_durations={"pickup": (2, 2), "guide": (4, 4), "return": (3, 3)})
    harness.run(12.0)
    return harness, TestClient(create_app(harness.service))


class TestGuideRequests:
    def test_valid_request_starts_job(self, ready):
        harness, client = ready
        resp = client.post(
            "/v1/guide-requests",
            json={"destination_id": "atrium", "reception_robot": "r01",
                  "facial_blob_b64": base64.b64encode(b"face").decode()},
        )
        assert resp.status_code == 201
        body = resp.json()
        assert body["state"] == "dispatching_pickup"
        assert body["job_id"].startswith("job-")

    def test_unknown_destination_400(self, ready):
        _, client = ready
        resp = client.post("/v1/guide-requests", json={"destination_id": "mars", "reception_robot": "r01"})
        assert resp.status_code == 400
        assert resp.json()["code"] == "invalid-destination"

    def test_unknown_reception_robot_404(self, ready):
        _, client = ready
        resp = client.post("/v1/guide-requests", json={"destination_id": "atrium", "reception_robot": "r99"})
        assert resp.status_code == 404

    def test_queued_when_no_guide_robot(self, tmp_path):
        harness = make_harness(tmp_path)
        harness.add_robot("r01", kind=RobotKind.RECEPTION, seed=5)
        harness.run(3.0)
        client = TestClient(create_app(harness.service))
        resp = client.post("/v1/guide-requests", json={"destination_id": "atrium", "reception_robot": "r01"})
        assert resp.status_code == 202
        assert resp.json()["state"] == "allocating"

    def test_queue_full_409(self, tmp_path):
        harness = make_harness(tmp_path, queue_cap=1)
        harness.add_robot("r01", kind=RobotKind.RECEPTION, seed=5)
        harness.run(3.0)
        client = TestClient(create_app(harness.service))
        body = {"destination_id": "atrium", "reception_robot": "r01"}
        assert client.post("/v1/guide-requests", json=body).status_code == 202
        resp = client.post("/v1/guide-requests", json=body)
        assert resp.status_code == 409
        assert resp.json()["code"] == "queue-full"
        failed = harness.service.engine.list_jobs()[-1]
        assert failed.failure_reason == "queue-full"

    def test_idempotent_retry_returns_same_job(self, ready):
        _, client = ready
        body = {"destination_id": "atrium", "reception_robot": "r01", "idempotency_key": "k-1"}
        first = client.post("/v1/guide-requests", json=body)
        second = client.post("/v1/guide-requests", json=body)
        assert first.status_code == 201
        assert second.status_code == 200
        assert second.json()["job_id"] == first.json()["job_id"]


class TestRobotEndpoints:
    def test_list_sorted_with_staleness_flags(self, ready):
        _, client = ready
        robots = client.get("/v1/robots").json()
        assert [r["robot_id"] for r in robots] == ["g01", "g02", "r01"]
        g01 = robots[0]
        assert g01["effective_status"] == "idle"
        assert g01["fields"]["position"]["stale"] is False

    def test_never_reported_fields_after_registration(self, tmp_path):
        harness = make_harness(tmp_path)
        harness.service.register_robot("g09", RobotKind.GUIDE)
        client = TestClient(create_app(harness.service))
        data = client.get("/v1/robots/g09").json()
        assert data["effective_status"] == "offline"
        assert all(not f["reported"] for f in data["fields"].values())

    def test_unknown_robot_404(self, ready):
        _, client = ready
        resp = client.get("/v1/robots/ghost")
        assert resp.status_code == 404
        assert resp.json()["code"] == "unknown-robot"


class TestJobEndpoints:
    def test_job_history_replayable(self, ready):
        harness, client = ready
        job_id = client.post(
            "/v1/guide-requests", json={"destination_id": "atrium", "reception_robot": "r01"}
        ).json()["job_id"]
        harness.run(40.0)
        data = client.get(f"/v1/jobs/{job_id}").json()
        assert data["state"] == "completed"
        assert len(data["transitions"]) == 8
        assert data["transitions"][0]["cause"] == "created"

    def test_filter_by_state(self, ready):
        harness, client = ready
        client.post("/v1/guide-requests", json={"destination_id": "atrium", "reception_robot": "r01"})
        harness.run(40.0)
        assert client.get("/v1/jobs?state=failed").json() == []
        assert len(client.get("/v1/jobs?state=completed").json()) == 1

    def test_bad_state_filter_400(self, ready):
        _, client = ready
        assert client.get("/v1/jobs?state=bogus").status_code == 400

    def test_unknown_job_404(self, ready):
        _, client = ready
        assert client.get("/v1/jobs/job-9999").status_code == 404


class TestAbort:
    def test_abort_active_job(self, ready):
        harness, client = ready
        job_id = client.post(
            "/v1/guide-requests", json={"destination_id": "atrium", "reception_robot": "r01"}
        ).json()["job_id"]
        harness.run(4.0)
        robot = client.get(f"/v1/jobs/{job_id}").json()["assigned_robot"]
        resp = client.post(f"/v1/robots/{robot}/commands", json={"kind": "abort"})
        assert resp.status_code == 202
        assert client.get(f"/v1/jobs/{job_id}").json()["state"] == "canceled"
        assert harness.service.reservations.holder(robot) is None

    def test_abort_idle_robot_409(self, ready):
        _, client = ready
        assert client.post("/v1/robots/g01/commands", json={"kind": "abort"}).status_code == 409

    def test_double_abort_second_409(self, ready):
        harness, client = ready
        job_id = client.post(
            "/v1/guide-requests", json={"destination_id": "atrium", "reception_robot": "r01"}
        ).json()["job_id"]
        harness.run(4.0)
        robot = client.get(f"/v1/jobs/{job_id}").json()["assigned_robot"]
        assert client.post(f"/v1/robots/{robot}/commands", json={"kind": "abort"}).status_code == 202
        assert client.post(f"/v1/robots/{robot}/commands", json={"kind": "abort"}).status_code == 409

    def test_abort_unknown_robot_404(self, ready):
        _, client = ready
        assert client.post("/v1/robots/ghost/commands", json={"kind": "abort"}).status_code == 404


class TestBlobEndpoint:
    def test_download_round_trip(self, ready):
        harness, client = ready
        blob_id = harness.service.vault.put_blob(b"profile-bytes")
        url = harness.service.vault.sign_url(blob_id, 60)
        resp = client.get(url.to_url())
        assert resp.status_code == 200
        assert resp.content == b"profile-bytes"

    def test_bad_signature_403(self, ready):
        harness, client = ready
        blob_id = harness.service.vault.put_blob(b"x")
        url = harness.service.vault.sign_url(blob_id, 60)
        resp = client.get(f"{url.path}?exp={url.expires_at}&sig={'0' * 64}")
        assert resp.status_code == 403

    def test_expired_403(self, ready):
        harness, client = ready
        blob_id = harness.service.vault.put_blob(b"x")
        url = harness.service.vault.sign_url(blob_id, 1)
        harness.run(5.0)
        assert client.get(url.to_url()).status_code == 403

    def test_deleted_blob_404(self, ready):
        harness, client = ready
        blob_id = harness.service.vault.put_blob(b"x")
        url = harness.service.vault.sign_url(blob_id, 60)
        harness.run(2.0)
        assert harness.service.vault.purge_expired(retention_s=1) == 1
        assert client.get(url.to_url()).status_code == 404


class TestCorrelation:
    def test_every_response_traceable_in_audit_log(self, ready):
        harness, client = ready
        responses = [
            client.get("/v1/robots"),
            client.post("/v1/guide-requests", json={"destination_id": "atrium", "reception_robot": "r01"}),
            client.get("/v1/jobs/job-missing"),
        ]
        logged = {r["correlation_id"] for r in harness.service.audit.records("api_request")}
        for resp in responses:
            assert resp.headers["x-correlation-id"] in logged

    def test_error_body_carries_correlation_id(self, ready):
        _, client = ready
        resp = client.get("/v1/robots/ghost")
        assert resp.json()["correlation_id"] == resp.headers["x-correlation-id"]


class TestStream:
    # the SSE wire itself is exercised against a real server in test_cli.py;
    # the in-process TestClient cannot stream an unbounded response

    def test_replay_from_ring_buffer(self, ready):
        harness, _ = ready
        hub = harness.service.hub
        start_id = hub.emit("notification", {"severity": "info", "message": "mark"}).event_id
        for i in range(3):
            hub.emit("notification", {"severity": "info", "message": f"n{i}"})
        client, replay = hub.subscribe(last_event_id=start_id)
        try:
            assert [e.event_id for e in replay] == [start_id + 1, start_id + 2, start_id + 3]
            assert [e.payload["message"] for e in replay] == ["n0", "n1", "n2"]
        finally:
            hub.unsubscribe(client)

    def test_replay_outside_buffer_returns_what_remains(self, ready):
        harness, _ = ready
        hub = harness.service.hub
        first = hub.emit("notification", {"message": "a"}).event_id
        client, replay = hub.subscribe(last_event_id=first - 10)
        try:
            assert replay[-1].event_id == first
        finally:
            hub.unsubscribe(client)

    def test_sse_format(self, ready):
        from guidefleet.gateway.api import _sse_format
        from guidefleet.gateway.events import MonitorEvent

        text = _sse_format(MonitorEvent(7, "shadow_update", {"robot_id": "g01"}, 123))
        assert text.startswith("id: 7\nevent: shadow_update\ndata: ")
        assert text.endswith("\n\n")

    def test_stream_conservation_for_prompt_client(self, ready):
        # one connected client, no disconnects: events received == events emitted
        harness, _ = ready
        hub = harness.service.hub
        client, _ = hub.subscribe()
        try:
            before = hub.emitted
            harness.add_robot("g09", seed=9)
            harness.run(20.0)
            emitted = hub.emitted - before
            received = []
            while not client.queue.empty():
                received.append(client.queue.get_nowait())
            assert emitted > 0
            assert len(received) == emitted
            ids = [e.event_id for e in received]
            assert ids == sorted(ids)
        finally:
            hub.unsubscribe(client)

    def test_slow_client_flagged_not_blocking(self, ready):
        harness, _ = ready
        hub = harness.service.hub
        client, _ = hub.subscribe()
        try:
            for i in range(hub._client_bound + 50):
                hub.emit("notification", {"i": i})
            assert client.lagged is True  # queue bounded, drop-and-flag
        finally:
            hub.unsubscribe(client)

    def test_job_failure_notification_streamed(self, tmp_path):
        harness = make_harness(tmp_path)
        harness.add_robot("r01", kind=RobotKind.RECEPTION, seed=50)
        harness.add_robot("g01", seed=1, task_durations={"pickup": (300, 300)})
        harness.run(12.0)
        client = TestClient(create_app(harness.service))
        marker = harness.service.hub.emit("notification", {"severity": "info", "message": "start"}).event_id
        client.post("/v1/guide-requests", json={"destination_id": "atrium", "reception_robot": "r01"})
        harness.run(45.0)  # pickup budget is 30 s in the harness
        notes = [
            e for e in harness.service.hub.buffered()
            if e.event_id > marker and e.kind == "notification" and e.payload.get("severity") == "error"
        ]
        assert notes, "expected an error notification after the timeout"
