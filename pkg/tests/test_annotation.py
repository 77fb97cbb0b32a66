from __future__ import annotations

from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from culturebench.annotation.service import create_app
from culturebench.annotation.store import (
    AcceptanceTable,
    AnnotationRecord,
    AnnotationStore,
    InsufficientPool,
    NotAssigned,
    ScoreOutOfRange,
    acceptance_rates,
    sample_batch,
)
from tests.conftest import make_pair


def zh_pool(n: int = 500):
    return [
        make_pair(language="zh", question=f"问题{i}？", answer=f"回答{i}。", tertiary=f"T{i % 40}", keyword=f"k{i}")
        for i in range(n)
    ]


def store_with_batch(tmp_path, pool=None, size=5, annotators=("alice", "bob")):
    pool = pool if pool is not None else zh_pool(50)
    store = AnnotationStore(tmp_path / "events.jsonl")
    batch = sample_batch(pool, "zh", size=size, seed=3, annotators=annotators)
    store.add_batch(batch)
    return store, batch, pool


# --- batches --------------------------------------------------------------------


def test_batch_samples_distinct_ids():
    batch = sample_batch(zh_pool(500), "zh", size=120, seed=1, annotators=("a", "b"))
    assert len(batch.qa_ids) == 120
    assert len(set(batch.qa_ids)) == 120


def test_batch_insufficient_pool():
    with pytest.raises(InsufficientPool):
        sample_batch(zh_pool(100), "zh", size=120, seed=1, annotators=("a", "b"))


def test_batch_same_seed_identical():
    pool = zh_pool(300)
    first = sample_batch(pool, "zh", size=120, seed=42, annotators=("a", "b"))
    second = sample_batch(pool, "zh", size=120, seed=42, annotators=("a", "b"))
    assert first.qa_ids == second.qa_ids


def test_batch_requires_exactly_two_annotators():
    with pytest.raises(ValueError):
        sample_batch(zh_pool(200), "zh", size=10, seed=1, annotators=("only-one",))


# --- submissions -----------------------------------------------------------------


def test_submit_revisions_and_last_write_wins(tmp_path):
    store, batch, _ = store_with_batch(tmp_path)
    qa = batch.qa_ids[0]
    first = store.submit(AnnotationRecord(qa, "alice", clarity=1, relevance=1, answer_quality=5))
    assert first == 1
    second = store.submit(AnnotationRecord(qa, "alice", clarity=0, relevance=1, answer_quality=3))
    assert second == 2
    stored = store.record_for(qa, "alice")
    assert (stored.clarity, stored.answer_quality) == (0, 3)


def test_submit_rejects_out_of_range_scores(tmp_path):
    store, batch, _ = store_with_batch(tmp_path)
    with pytest.raises(ScoreOutOfRange):
        store.submit(AnnotationRecord(batch.qa_ids[0], "alice", clarity=1, relevance=1, answer_quality=6))
    with pytest.raises(ScoreOutOfRange):
        store.submit(AnnotationRecord(batch.qa_ids[0], "alice", clarity=2, relevance=1, answer_quality=4))


def test_submit_rejects_unassigned(tmp_path):
    store, batch, _ = store_with_batch(tmp_path)
    with pytest.raises(NotAssigned):
        store.submit(AnnotationRecord("nonexistent-id", "alice", 1, 1, 5))
    with pytest.raises(NotAssigned):
        store.submit(AnnotationRecord(batch.qa_ids[0], "mallory", 1, 1, 5))


def test_store_replay_rebuilds_identical_state(tmp_path):
    store, batch, _ = store_with_batch(tmp_path)
    for qa in batch.qa_ids:
        store.submit(AnnotationRecord(qa, "alice", 1, 1, 5))
        store.submit(AnnotationRecord(qa, "bob", 1, 0, 4))
    reloaded = AnnotationStore(tmp_path / "events.jsonl")
    before = acceptance_rates(store.records(), store.batches.values()).to_dict()
    after = acceptance_rates(reloaded.records(), reloaded.batches.values()).to_dict()
    assert before == after


# --- acceptance table ---------------------------------------------------------------


def test_high_quality_rate_hand_computed(tmp_path):
    store, batch, _ = store_with_batch(tmp_path, size=4)
    for qa, quality in zip(batch.qa_ids, [5, 4, 3, 4]):
        store.submit(AnnotationRecord(qa, "alice", 1, 1, quality))
        store.submit(AnnotationRecord(qa, "bob", 1, 1, 4))
    table = acceptance_rates(store.records(), store.batches.values())
    assert table.per_annotator[("zh", "A", "answer_quality")] == pytest.approx(75.0)  # 3 of 4 >= 4
    assert table.incomplete is False


def test_language_average_is_mean_of_the_two_annotators():
    table = AcceptanceTable.from_rates({"clarity": {"zh": (98.3, 99.2)}})
    assert table.to_dict()["dimensions"]["clarity"]["language_average"]["zh"] == 98.8


def test_overall_average_half_up_rounding():
    # 91.6 and 99.9 -> 95.75 -> rounds half-up to 95.8
    table = AcceptanceTable.from_rates({"clarity": {"zh": (91.6, 99.9)}})
    assert table.to_dict()["dimensions"]["clarity"]["overall"] == 95.8


def test_partial_batches_flagged_incomplete(tmp_path):
    store, batch, _ = store_with_batch(tmp_path, size=5)
    store.submit(AnnotationRecord(batch.qa_ids[0], "alice", 1, 1, 5))
    store.submit(AnnotationRecord(batch.qa_ids[0], "bob", 1, 1, 4))
    table = acceptance_rates(store.records(), store.batches.values())
    assert table.incomplete is True
    assert table.per_annotator[("zh", "A", "clarity")] == pytest.approx(100.0)  # over submitted counts


def test_single_annotator_rates_appear_without_language_average(tmp_path):
    store, batch, _ = store_with_batch(tmp_path, size=4)
    for qa in batch.qa_ids[:2]:
        store.submit(AnnotationRecord(qa, "alice", 1, 0, 5))
    table = acceptance_rates(store.records(), store.batches.values())
    assert table.per_annotator[("zh", "A", "clarity")] == pytest.approx(100.0)
    assert table.per_annotator[("zh", "A", "relevance")] == pytest.approx(0.0)
    assert ("zh", "clarity") not in table.language_average  # needs both annotators
    assert table.incomplete is True
    exported = table.to_dict()
    assert exported["dimensions"]["clarity"]["per_annotator"]["zh"] == {"A": 100.0}
    assert exported["submitted"] == {"zh/A": 2, "zh/B": 0}


def test_no_record_readable_without_assignment(tmp_path):
    store, batch, _ = store_with_batch(tmp_path)
    assert store.record_for(batch.qa_ids[0], "mallory") is None


# --- HTTP service ---------------------------------------------------------------------


@pytest.fixture
def client(tmp_path):
    pool = zh_pool(50)
    store, batch, _ = store_with_batch(tmp_path, pool=pool, size=5)
    app = create_app(
        store,
        {p.id: p for p in pool},
        excerpts={batch.qa_ids[0]: "来源片段"},
        tokens={"alice": "tok-alice", "bob": "tok-bob"},
    )
    test_client = TestClient(app)
    test_client.batch = batch
    return test_client


def test_batches_endpoint_requires_token(client):
    assert client.get("/api/batches/alice").status_code == 401
    ok = client.get("/api/batches/alice", headers={"X-Annotator-Token": "tok-alice"})
    assert ok.status_code == 200
    payload = ok.json()
    assert payload["annotator"] == "alice"
    assert payload["batches"][0]["size"] == 5
    assert len(payload["batches"][0]["tasks"]) == 5
    first = payload["batches"][0]["tasks"][0]
    assert {"qa_id", "question", "answer", "excerpt", "topic_path", "annotated"} <= set(first)


def test_task_endpoint_returns_provenance(client):
    qa_id = client.batch.qa_ids[0]
    payload = client.get(f"/api/task/{qa_id}").json()
    assert payload["qa_id"] == qa_id
    assert payload["excerpt"] == "来源片段"
    assert "page_url" in payload["provenance"]
    assert client.get("/api/task/zzz").status_code == 404


def test_submit_endpoint_happy_path_and_errors(client):
    qa_id = client.batch.qa_ids[0]
    body = {"qa_id": qa_id, "annotator_id": "alice", "clarity": 1, "relevance": 1, "answer_quality": 5}
    ok = client.post("/api/annotations", json=body, headers={"X-Annotator-Token": "tok-alice"})
    assert ok.status_code == 200
    assert ok.json() == {"revision": 1}

    again = client.post("/api/annotations", json=body, headers={"X-Annotator-Token": "tok-alice"})
    assert again.json() == {"revision": 2}

    bad = client.post(
        "/api/annotations",
        json={**body, "answer_quality": 6},
        headers={"X-Annotator-Token": "tok-alice"},
    )
    assert bad.status_code == 400
    assert bad.json()["error"] == "ScoreOutOfRange"

    unassigned = client.post(
        "/api/annotations",
        json={**body, "qa_id": "not-assigned"},
        headers={"X-Annotator-Token": "tok-alice"},
    )
    assert unassigned.status_code == 403
    assert unassigned.json()["error"] == "NotAssigned"

    assert client.post("/api/annotations", json=body).status_code == 401


def test_stats_endpoint_reflects_submissions(client):
    for qa_id in client.batch.qa_ids:
        for annotator, token in (("alice", "tok-alice"), ("bob", "tok-bob")):
            client.post(
                "/api/annotations",
                json={"qa_id": qa_id, "annotator_id": annotator, "clarity": 1, "relevance": 1, "answer_quality": 5},
                headers={"X-Annotator-Token": token},
            )
    stats = client.get("/api/stats").json()
    assert stats["incomplete"] is False
    assert stats["dimensions"]["clarity"]["language_average"]["zh"] == 100.0


def test_rubric_endpoint_serves_scoring_descriptions(client):
    rubric = client.get("/api/rubric").json()
    assert rubric["answer_quality"]["scores"]["5"].startswith("Exceptional answer")
    assert set(rubric) == {"clarity", "relevance", "answer_quality"}


FRONTEND_DIST = Path(__file__).parent.parent / "frontend" / "dist"


@pytest.mark.skipif(not FRONTEND_DIST.is_dir(), reason="frontend not built (npm run build in frontend/)")
def test_built_ui_served_as_static_assets(tmp_path):
    pool = zh_pool(20)
    store, batch, _ = store_with_batch(tmp_path, pool=pool, size=5)
    app = create_app(store, {p.id: p for p in pool}, static_dir=FRONTEND_DIST)
    test_client = TestClient(app)
    index = test_client.get("/")
    assert index.status_code == 200
    assert "text/html" in index.headers["content-type"]
    assert 'src="./assets/main.js"' in index.text
    module = test_client.get("/assets/main.js")
    assert module.status_code == 200
    assert "javascript" in module.headers["content-type"]
    # API routes still win over the static mount
    assert test_client.get("/api/rubric").status_code == 200
