from __future__ import annotations

import json
import threading

import pytest
from fastapi.testclient import TestClient

from majutsu.scene import doc_to_dict, load_document
from majutsu.server import create_app

from conftest import build_scene

EVAL_MANIFEST = {
    "methods": {
        "method_x": ["x0", "x1"],
        "method_y": ["y0", "y1"],
    }
}


@pytest.fixture
def client(tmp_path):
    app = create_app(state_dir=tmp_path / "state", eval_manifest=EVAL_MANIFEST, seed=3)
    return TestClient(app)


def make_session(client) -> str:
    doc = build_scene(n_buildings=2, n_trees=2, n_lamps=1)
    response = client.post("/sessions", json={"document": doc_to_dict(doc)})
    assert response.status_code == 201, response.text
    return response.json()["session_id"]


class TestSessions:
    def test_healthz(self, client):
        assert client.get("/healthz").json()["status"] == "ok"

    def test_create_and_fetch(self, client):
        sid = make_session(client)
        response = client.get(f"/sessions/{sid}/scene")
        assert response.status_code == 200
        doc = load_document(response.content)
        assert doc.revision == 1

    def test_glb_endpoint(self, client):
        sid = make_session(client)
        response = client.get(f"/sessions/{sid}/scene", params={"format": "glb"})
        assert response.status_code == 200
        assert response.headers["content-type"].startswith("model/gltf-binary")
        assert response.content[:4] == b"glTF"

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/nope/scene").status_code == 404

    def test_bad_document_400(self, client):
        response = client.post("/sessions", json={"document": {"version": "majutsu-scene/1"}})
        assert response.status_code == 400

    def test_command_round_trip(self, client):
        sid = make_session(client)
        response = client.post(
            f"/sessions/{sid}/commands", json={"text": "delete bldg_0001"}
        )
        assert response.status_code == 200, response.text
        body = response.json()
        assert body["revision"] == 2
        assert body["diff"]["removed_instances"] == ["bldg_0001"]

    def test_parse_error_400_with_position(self, client):
        sid = make_session(client)
        response = client.post(f"/sessions/{sid}/commands", json={"text": "move x by 1,2"})
        assert response.status_code == 400
        detail = response.json()["detail"]
        assert detail["error"] == "ParseError"
        assert "position" in detail

    def test_unknown_instance_404(self, client):
        sid = make_session(client)
        response = client.post(f"/sessions/{sid}/commands", json={"text": "delete ghost"})
        assert response.status_code == 404
        assert response.json()["detail"]["error"] == "UnknownInstance"

    def test_stale_revision_409(self, client):
        sid = make_session(client)
        ok = client.post(
            f"/sessions/{sid}/commands",
            json={"text": "move bldg_0000 by (1,0)", "base_revision": 1},
        )
        assert ok.status_code == 200
        stale = client.post(
            f"/sessions/{sid}/commands",
            json={"text": "move bldg_0000 by (1,0)", "base_revision": 1},
        )
        assert stale.status_code == 409
        assert stale.json()["detail"]["current_revision"] == 2

    def test_undo_redo_endpoints(self, client):
        sid = make_session(client)
        client.post(f"/sessions/{sid}/commands", json={"text": "move bldg_0000 by (5,0)"})
        undo_response = client.post(f"/sessions/{sid}/undo")
        assert undo_response.status_code == 200
        assert undo_response.json()["revision"] == 3
        redo_response = client.post(f"/sessions/{sid}/redo")
        assert redo_response.status_code == 200

    def test_undo_without_history_409(self, client):
        sid = make_session(client)
        assert client.post(f"/sessions/{sid}/undo").status_code == 409

    def test_json_command_body(self, client):
        sid = make_session(client)
        command = {"op": "move", "instance_id": "bldg_0000", "delta": [2, 0, 0], "rotate": 0, "scale": 1}
        response = client.post(f"/sessions/{sid}/commands", json={"command": command})
        assert response.status_code == 200
        assert response.json()["diff"]["modified_instances"] == ["bldg_0000"]

    def test_events_long_poll(self, client):
        sid = make_session(client)
        quick = client.get(
            f"/sessions/{sid}/events", params={"since": 5, "timeout_s": 0.05}
        )
        assert quick.json()["changed"] is False
        client.post(f"/sessions/{sid}/commands", json={"text": "move bldg_0000 by (1,0)"})
        ready = client.get(f"/sessions/{sid}/events", params={"since": 1, "timeout_s": 0.05})
        assert ready.json()["changed"] is True
        assert ready.json()["revision"] == 2
        assert ready.json()["can_undo"] is True

    def test_serialized_concurrent_commands(self, client):
        sid = make_session(client)
        results = []

        def worker(dx):
            results.append(
                client.post(
                    f"/sessions/{sid}/commands",
                    json={"text": f"move bldg_0000 by ({dx},0)"},
                ).json()["revision"]
            )

        threads = [threading.Thread(target=worker, args=(i,)) for i in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(results) == [2, 3, 4, 5]

    def test_create_session_from_pipeline(self, client):
        response = client.post(
            "/sessions", json={"pipeline": {"prompt": "tiny grid", "seed": 4, "map_size": 96}}
        )
        assert response.status_code == 201, response.text
        sid = response.json()["session_id"]
        doc = load_document(client.get(f"/sessions/{sid}/scene").content)
        assert doc.metadata["width_px"] == 96
        assert len(doc.instances) > 0

    def test_crash_restore(self, tmp_path):
        state = tmp_path / "state"
        app = create_app(state_dir=state, seed=0)
        with TestClient(app) as client_a:
            doc = build_scene(n_buildings=2)
            sid = client_a.post(
                "/sessions", json={"document": doc_to_dict(doc), "session_id": "persist1"}
            ).json()["session_id"]
            client_a.post(f"/sessions/{sid}/commands", json={"text": "move bldg_0000 by (9,0)"})
        # simulate restart
        app2 = create_app(state_dir=state, seed=0)
        with TestClient(app2) as client_b:
            response = client_b.get(f"/sessions/{sid}/scene")
            assert response.status_code == 200
            restored = load_document(response.content)
            assert restored.revision == 2
            undo_response = client_b.post(f"/sessions/{sid}/undo")
            assert undo_response.status_code == 200


class TestEval:
    def test_schedule_shape(self, client):
        response = client.get("/eval/schedule", params={"dimension": "SVC"})
        assert response.status_code == 200
        pairs = response.json()["pairs"]
        assert pairs
        participation = {}
        for p in pairs:
            participation[p["image_a"]] = participation.get(p["image_a"], 0) + 1
            participation[p["image_b"]] = participation.get(p["image_b"], 0) + 1
        assert min(participation.values()) >= 10

    def test_verdict_flow_increments_leaderboard(self, client):
        client.get("/eval/schedule", params={"dimension": "SVC"})
        before = client.get("/eval/leaderboard").json()["record_count"]
        response = client.post(
            "/eval/verdicts",
            json={"dimension": "SVC", "index": 0, "winner": "A", "judge": "tester"},
        )
        assert response.status_code == 201, response.text
        after = client.get("/eval/leaderboard").json()
        assert after["record_count"] == before + 1
        assert "SVC" in after["dimensions"]

    def test_duplicate_verdict_409(self, client):
        client.get("/eval/schedule", params={"dimension": "MTF"})
        body = {"dimension": "MTF", "index": 1, "winner": "B", "judge": "t"}
        assert client.post("/eval/verdicts", json=body).status_code == 201
        assert client.post("/eval/verdicts", json=body).status_code == 409

    def test_unknown_image_404(self, client):
        client.get("/eval/schedule", params={"dimension": "LA"})
        response = client.post(
            "/eval/verdicts",
            json={"dimension": "LA", "index": 0, "winner": "A", "image_a": "ghost_image"},
        )
        assert response.status_code == 404

    def test_bad_dimension_400(self, client):
        assert client.get("/eval/schedule", params={"dimension": "XYZ"}).status_code == 400

    def test_leaderboard_sorted_by_conservative(self, client):
        client.get("/eval/schedule", params={"dimension": "SRC"})
        schedule = client.get("/eval/schedule", params={"dimension": "SRC"}).json()["pairs"]
        for i, pair in enumerate(schedule):
            winner = "A" if pair["method_a"] == "method_x" else "B"
            client.post(
                "/eval/verdicts",
                json={"dimension": "SRC", "index": i, "winner": winner, "judge": "t"},
            )
        rows = client.get("/eval/leaderboard").json()["dimensions"]["SRC"]
        assert rows[0]["method"] == "method_x"
        assert rows[0]["rdr_score"] > rows[1]["rdr_score"]

    def test_verdicts_persist(self, tmp_path):
        state = tmp_path / "state"
        app = create_app(state_dir=state, eval_manifest=EVAL_MANIFEST, seed=1)
        with TestClient(app) as c:
            c.get("/eval/schedule", params={"dimension": "SVC"})
            c.post(
                "/eval/verdicts",
                json={"dimension": "SVC", "index": 0, "winner": "A", "judge": "t"},
            )
        app2 = create_app(state_dir=state, eval_manifest=EVAL_MANIFEST, seed=1)
        with TestClient(app2) as c2:
            assert c2.get("/eval/leaderboard").json()["record_count"] == 1
