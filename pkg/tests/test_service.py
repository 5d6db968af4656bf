import pytest
from fastapi.testclient import TestClient

from planloop.service import create_app


@pytest.fixture
def client():
    return TestClient(create_app())


def make_session(client, **overrides):
    body = {"world": "apartment", "backend": "rule"}
    body.update(overrides)
    resp = client.post("/sessions", json=body)
    assert resp.status_code == 201
    return resp.json()["id"]


class TestSessionLifecycle:
    def test_create_and_fetch(self, client):
        sid = make_session(client)
        got = client.get(f"/sessions/{sid}").json()
        assert got["state"] == "awaiting_user"
        assert got["world"]["name"] == "apartment"
        assert len(got["world"]["objects"]) == 10

    def test_unknown_world_rejected(self, client):
        resp = client.post("/sessions", json={"world": "mars_base"})
        assert resp.status_code == 400

    def test_remote_backend_requires_a_url(self, client, monkeypatch):
        monkeypatch.delenv("PLANLOOP_REMOTE_URL", raising=False)
        resp = client.post("/sessions", json={"backend": "remote"})
        assert resp.status_code == 400

    def test_unknown_session_is_404(self, client):
        assert client.get("/sessions/deadbeef").status_code == 404

    def test_delete(self, client):
        sid = make_session(client)
        assert client.delete(f"/sessions/{sid}").status_code == 204
        assert client.get(f"/sessions/{sid}").status_code == 404

    def test_worlds_listing(self, client):
        assert client.get("/worlds").json() == {
            "worlds": ["apartment", "apartment_xl"]
        }


class TestMessages:
    def test_full_task_round_trip(self, client):
        sid = make_session(client)
        resp = client.post(
            f"/sessions/{sid}/message", json={"text": "fetch me the coke"}
        )
        body = resp.json()
        assert body["state"] == "done"
        types = [e["type"] for e in body["events"]]
        assert "plan" in types and "step" in types

    def test_guidance_flow_over_http(self, client):
        sid = make_session(client)
        first = client.post(
            f"/sessions/{sid}/message", json={"text": "fetch me the cup"}
        ).json()
        assert first["state"] == "awaiting_guidance"
        kinds = [
            e["data"]["kind"] for e in first["events"] if e["type"] == "failure"
        ]
        assert kinds == ["ambiguous_reference"]
        second = client.post(
            f"/sessions/{sid}/message", json={"text": "the red cup please"}
        ).json()
        assert second["state"] == "done"

    def test_empty_text_rejected(self, client):
        sid = make_session(client)
        resp = client.post(f"/sessions/{sid}/message", json={"text": "   "})
        assert resp.status_code == 400

    def test_closed_session_conflicts(self, client):
        sid = make_session(client, max_recovery_rounds=0)
        client.post(f"/sessions/{sid}/message", json={"text": "fetch me the cup"})
        resp = client.post(f"/sessions/{sid}/message", json={"text": "red cup"})
        assert resp.status_code == 409

    def test_sessions_are_isolated(self, client):
        a = make_session(client)
        b = make_session(client)
        client.post(f"/sessions/{a}/message", json={"text": "fetch me the coke"})
        world_b = client.get(f"/sessions/{b}").json()["world"]
        coke = next(o for o in world_b["objects"] if o["name"] == "coke")
        assert coke["pose"][2] == 0.75  # still on the table in session b


class TestEventStream:
    def test_replay_then_live(self, client):
        sid = make_session(client)
        client.post(f"/sessions/{sid}/message", json={"text": "go to the table"})
        with client.websocket_connect(f"/sessions/{sid}/events") as ws:
            first = ws.receive_json()
            assert first == {"seq": 0, "type": "session_started", "data": {"world": "apartment"}}
            seqs = [first["seq"]]
            while True:
                ev = ws.receive_json()
                seqs.append(ev["seq"])
                if ev["type"] == "state" and ev["data"]["state"] == "done":
                    break
            assert seqs == list(range(len(seqs)))

    def test_cursor_skips_replayed_events(self, client):
        sid = make_session(client)
        done = client.post(
            f"/sessions/{sid}/message", json={"text": "go to the table"}
        ).json()
        last_seq = done["events"][-1]["seq"]
        with client.websocket_connect(
            f"/sessions/{sid}/events?after={last_seq - 1}"
        ) as ws:
            ev = ws.receive_json()
            assert ev["seq"] == last_seq

    def test_unknown_session_socket_closes(self, client):
        with pytest.raises(Exception):
            with client.websocket_connect("/sessions/nope/events") as ws:
                ws.receive_json()
