from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from crossdoc.engine import QueueConfig
from crossdoc.service import create_app
from crossdoc.store import Store

from conftest import make_pair


@pytest.fixture
def client(tmp_path):
    store = Store(tmp_path / "store", config=QueueConfig(sampling_seed=7, iaa_fraction=0.0))
    engine = store.engine
    engine.ingest_pair(make_pair())
    for start, end in [(0, 5), (6, 10)]:
        engine.add_mention("p1-news", start, end)
    engine.add_mention("p1-sci", 0, 12)
    store.stub_embed_pair("p1", d=8)
    engine.generate_candidates("p1")
    with TestClient(create_app(store)) as c:
        yield c
    store.close()


class TestTaskEndpoint:
    def test_task_payload_shape(self, client):
        response = client.get("/api/task", params={"annotator": "a1"})
        assert response.status_code == 200
        task = response.json()
        assert set(task["mentions"]) == {"news", "science"}
        assert task["documents"]["news"]["summary_text"]
        assert task["co_clustered"] == []
        assert task["queue"]["pending_total"] >= 1
        offsets = task["mentions"]["news"]
        text = task["documents"]["news"]["summary_text"]
        assert text[offsets["start_char"] : offsets["end_char"]] == offsets["surface"]

    def test_green_highlights_after_merge(self, client):
        task = client.get("/api/task", params={"annotator": "a1"}).json()
        client.post(
            "/api/annotation",
            json={
                "annotator": "a1",
                "pair_key": task["pair_key"],
                "verdict": "yes",
                "difficult": False,
            },
        )
        following = client.get("/api/task", params={"annotator": "a1"}).json()
        assert following["co_clustered"], "second task should show the merged cluster"

    def test_empty_queue_is_204(self, client):
        for _ in range(4):
            response = client.get("/api/task", params={"annotator": "a1"})
            if response.status_code == 204:
                break
            task = response.json()
            client.post(
                "/api/annotation",
                json={
                    "annotator": "a1",
                    "pair_key": task["pair_key"],
                    "verdict": "no",
                    "difficult": False,
                },
            )
        assert client.get("/api/task", params={"annotator": "a1"}).status_code == 204


class TestAnnotationEndpoint:
    def test_submit_then_stale_claim_conflict(self, client):
        task = client.get("/api/task", params={"annotator": "a1"}).json()
        ok = client.post(
            "/api/annotation",
            json={"annotator": "a1", "pair_key": task["pair_key"], "verdict": "yes"},
        )
        assert ok.status_code == 200
        stale = client.post(
            "/api/annotation",
            json={"annotator": "a2", "pair_key": task["pair_key"], "verdict": "yes"},
        )
        assert stale.status_code == 409

    def test_unknown_pair_404(self, client):
        response = client.post(
            "/api/annotation",
            json={"annotator": "a1", "pair_key": ["zz", "yy"], "verdict": "yes"},
        )
        assert response.status_code == 404

    def test_bad_verdict_422(self, client):
        task = client.get("/api/task", params={"annotator": "a1"}).json()
        response = client.post(
            "/api/annotation",
            json={"annotator": "a1", "pair_key": task["pair_key"], "verdict": "maybe"},
        )
        assert response.status_code == 422

    def test_idempotency_token_single_state_change(self, client):
        task = client.get("/api/task", params={"annotator": "a1"}).json()
        body = {
            "annotator": "a1",
            "pair_key": task["pair_key"],
            "verdict": "yes",
            "idempotency_token": "tok-42",
        }
        first = client.post("/api/annotation", json=body)
        second = client.post("/api/annotation", json=body)
        assert first.status_code == second.status_code == 200
        assert first.json()["seq"] == second.json()["seq"]
        assert second.json()["replayed_token"] is True


class TestProposalAndSpanEndpoints:
    def test_counter_proposal(self, client):
        task = client.get("/api/task", params={"annotator": "a1"}).json()
        response = client.post(
            "/api/pair",
            json={
                "annotator": "a1",
                "shown_pair_key": task["pair_key"],
                "doc_id": "p1-news",
                "start_char": 11,
                "end_char": 20,
            },
        )
        assert response.status_code == 200
        assert response.json()["similarity"] is not None

    def test_duplicate_proposal_409(self, client):
        task = client.get("/api/task", params={"annotator": "a1"}).json()
        mention = task["mentions"]["news"]
        response = client.post(
            "/api/pair",
            json={
                "annotator": "a1",
                "shown_pair_key": task["pair_key"],
                "doc_id": mention["doc_id"],
                "start_char": mention["start_char"],
                "end_char": mention["end_char"],
            },
        )
        assert response.status_code == 409

    def test_span_adjust_and_errors(self, client):
        task = client.get("/api/task", params={"annotator": "a1"}).json()
        mention = task["mentions"]["news"]
        ok = client.post(
            "/api/span",
            json={
                "annotator": "a1",
                "mention_id": mention["mention_id"],
                "start_char": 0,
                "end_char": 10,
            },
        )
        assert ok.status_code == 200
        assert ok.json()["end_char"] == 10
        bad = client.post(
            "/api/span",
            json={"annotator": "a1", "mention_id": "p1-news:6-10", "start_char": 3, "end_char": 3},
        )
        assert bad.status_code == 422


class TestStatsAndExport:
    def test_corpus_stats_match_validation(self, client):
        stats = client.get("/api/stats/corpus").json()
        assert stats["counts"]["documents"] == 2
        assert stats["counts"]["mentions"] == 3
        assert stats["violations"] == []

    def test_agreement_endpoint(self, client):
        response = client.get("/api/stats/agreement")
        assert response.status_code == 200
        assert "pairwise" in response.json()

    def test_cluster_export_roundtrips_into_scorer(self, client, tmp_path):
        task = client.get("/api/task", params={"annotator": "a1"}).json()
        client.post(
            "/api/annotation",
            json={"annotator": "a1", "pair_key": task["pair_key"], "verdict": "yes"},
        )
        exported = client.get("/api/export/clusters").text
        assert exported.strip()
        path = tmp_path / "clusters.jsonl"
        path.write_text(exported)
        from crossdoc.metrics import muc_score, read_cluster_file

        clusters = read_cluster_file(path)
        report = muc_score(clusters, clusters)
        assert report.f1 == 1.0
