import json

import pytest
from fastapi.testclient import TestClient

from incoforge.annotation import AnnotationStore
from incoforge.annotation.service import create_app

from test_annotation import make_candidates, probes

ADMIN = {"X-Admin-Token": "letmein"}


@pytest.fixture
def client(tmp_path):
    store = AnnotationStore(str(tmp_path / "state"))
    store.add_screening_probes(probes(4))
    store.enqueue(make_candidates(6))
    app = create_app(store, admin_token="letmein")
    with TestClient(app) as c:
        c.store = store
        yield c


def auth(token):
    return {"Authorization": f"Bearer {token}"}


def new_judge(client, name="judge", role="judge"):
    resp = client.post("/api/workers", json={"name": name, "role": role}, headers=ADMIN)
    assert resp.status_code == 201
    return resp.json()["token"]


def pass_screening(client, token):
    while True:
        resp = client.get("/api/tasks/next", headers=auth(token)).json()
        if resp["phase"] != "screening" or resp["task"] is None:
            return resp
        cid = resp["task"]["candidate_id"]
        correct = client.store.probes[cid]["auto_label"]
        client.post(
            "/api/judgments",
            json={"candidate_id": cid, "label": correct},
            headers=auth(token),
        )


class TestWorkers:
    def test_admin_required(self, client):
        resp = client.post("/api/workers", json={"name": "x"})
        assert resp.status_code == 401
        assert resp.json()["error"] == "unknown_worker"

    def test_issue_token(self, client):
        token = new_judge(client)
        assert client.get("/api/tasks/next", headers=auth(token)).status_code == 200


class TestTasksAndJudgments:
    def test_full_verification_flow(self, client):
        token = new_judge(client)
        status = pass_screening(client, token)
        assert status["phase"] == "verification"
        done = 0
        while True:
            resp = client.get("/api/tasks/next", headers=auth(token)).json()
            if resp["task"] is None:
                assert resp["done"] is True
                break
            ack = client.post(
                "/api/judgments",
                json={"candidate_id": resp["task"]["candidate_id"], "label": 1},
                headers=auth(token),
            )
            assert ack.status_code == 200
            done += 1
        assert done == 6

    def test_task_payload_never_exposes_auto_label(self, client):
        token = new_judge(client)
        resp = client.get("/api/tasks/next", headers=auth(token))
        body = resp.text
        assert "auto_label" not in body

    def test_duplicate_judgment_409(self, client):
        token = new_judge(client)
        pass_screening(client, token)
        cid = client.get("/api/tasks/next", headers=auth(token)).json()["task"]["candidate_id"]
        post = {"candidate_id": cid, "label": 0}
        assert client.post("/api/judgments", json=post, headers=auth(token)).status_code == 200
        dup = client.post("/api/judgments", json=post, headers=auth(token))
        assert dup.status_code == 409
        assert dup.json()["error"] == "duplicate_judgment"

    def test_idempotency_key_retry_is_200_and_single_entry(self, client, tmp_path):
        token = new_judge(client)
        pass_screening(client, token)
        cid = client.get("/api/tasks/next", headers=auth(token)).json()["task"]["candidate_id"]
        body = {"candidate_id": cid, "label": 1, "idempotency_key": "retry-1"}
        first = client.post("/api/judgments", json=body, headers=auth(token))
        second = client.post("/api/judgments", json=body, headers=auth(token))
        assert first.status_code == second.status_code == 200
        assert len(client.store.judgments["verification"][cid]) == 1

    def test_missing_fields_400(self, client):
        token = new_judge(client)
        resp = client.post("/api/judgments", json={"label": 1}, headers=auth(token))
        assert resp.status_code == 400

    def test_unknown_token_401(self, client):
        resp = client.get("/api/tasks/next", headers=auth("bogus"))
        assert resp.status_code == 401


class TestProgressFilterExport:
    def _judge_everything(self, client, n_judges=4):
        for i in range(n_judges):
            token = new_judge(client, f"j{i}")
            pass_screening(client, token)
            while True:
                resp = client.get("/api/tasks/next", headers=auth(token)).json()
                if resp["task"] is None:
                    break
                cid = resp["task"]["candidate_id"]
                label = client.store.candidates[cid]["auto_label"]
                client.post(
                    "/api/judgments",
                    json={"candidate_id": cid, "label": label},
                    headers=auth(token),
                )

    def test_progress_requires_some_auth(self, client):
        assert client.get("/api/progress").status_code == 401
        assert client.get("/api/progress", headers=ADMIN).status_code == 200
        token = new_judge(client)
        resp = client.get("/api/progress", headers=auth(token))
        assert resp.status_code == 200
        assert resp.json()["candidates"] == 6

    def test_filter_requires_completeness(self, client):
        resp = client.post("/api/filter", json={}, headers=ADMIN)
        assert resp.status_code == 409
        assert resp.json()["error"] == "incomplete_judgments"

    def test_filter_then_export(self, client):
        self._judge_everything(client)
        resp = client.post("/api/filter", json={"n_judges": 4, "required_agree": 3},
                           headers=ADMIN)
        assert resp.status_code == 200
        assert resp.json()["kept_count"] == 6
        export = client.get("/api/export", headers=ADMIN)
        assert export.status_code == 200
        lines = [json.loads(l) for l in export.text.strip().splitlines()]
        assert len(lines) == 6
        assert all(l["tally"]["agree"] == 4 for l in lines)

    def test_late_submission_after_filter(self, client):
        self._judge_everything(client)
        client.post("/api/filter", json={}, headers=ADMIN)
        late = new_judge(client, "late")
        pass_screening(client, late)
        resp = client.post(
            "/api/judgments", json={"candidate_id": "c000", "label": 1}, headers=auth(late)
        )
        assert resp.status_code == 403

    def test_export_requires_admin(self, client):
        assert client.get("/api/export").status_code == 401


class TestStaticMount:
    def test_static_dir_served(self, tmp_path):
        store = AnnotationStore(str(tmp_path / "state"))
        static = tmp_path / "ui"
        static.mkdir()
        (static / "index.html").write_text("<html><body>judge ui</body></html>")
        app = create_app(store, admin_token="x", static_dir=str(static))
        with TestClient(app) as c:
            resp = c.get("/")
            assert resp.status_code == 200
            assert "judge ui" in resp.text
