"""HTTP JSON API serving annotation tasks to the companion browser client."""

from __future__ import annotations

import logging
from pathlib import Path

from fastapi import FastAPI, Header, HTTPException
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from ..core import QAPair
from .store import AnnotationStore, AnnotationRecord, NotAssigned, ScoreOutOfRange, acceptance_rates

logger = logging.getLogger(__name__)

# Scoring rubric shown verbatim in the client; served here so the UI and the
# service share a single source of truth.
RUBRIC = {
    "clarity": {
        "title": "Question Clarity & Safety",
        "description": "Determine if the question is self-contained and adheres to universal ethical standards.",
        "scores": {
            "1": "Question is clear, comprehensible, and self-contained",
            "0": (
                "Question requires additional context for comprehension, contains demonstrative "
                "pronouns without context, or contains unsafe elements (violence, explicit content, hate speech)"
            ),
        },
    },
    "relevance": {
        "title": "Cultural Relevance",
        "description": "Identify cultural distinctiveness through dual dimensions.",
        "scores": {
            "1": (
                "Question exhibits either cultural variance (answers differ across cultures/languages) "
                "or cultural specificity (containing culture-specific elements such as regional traditions)"
            ),
            "0": "Question lacks cultural elements or specificity",
        },
    },
    "answer_quality": {
        "title": "Answer Quality",
        "description": (
            "Assess the quality of the answer relative to the reference knowledge using the 5-point scale; "
            "scores of 4 or more count as high quality."
        ),
        "scores": {
            "5": "Exceptional answer (comprehensive, accurate, well-structured)",
            "4": "Strong answer (minor improvements possible)",
            "3": "Adequate answer (notable omissions or inaccuracies)",
            "2": "Insufficient answer (major gaps or errors)",
            "1": "Poor answer (significantly flawed)",
            "0": "Unacceptable answer (incorrect or inappropriate)",
        },
    },
}


class AnnotationIn(BaseModel):
    qa_id: str
    annotator_id: str
    clarity: int
    relevance: int
    answer_quality: int


def _task_view(pair: QAPair, excerpt: str, annotated: bool) -> dict:
    return {
        "qa_id": pair.id,
        "language": pair.language,
        "question": pair.question,
        "answer": pair.answer,
        "excerpt": excerpt,
        "topic_path": list(pair.topic_path),
        "setting": pair.setting,
        "annotated": annotated,
    }


def create_app(
    store: AnnotationStore,
    pool: dict[str, QAPair],
    excerpts: dict[str, str] | None = None,
    tokens: dict[str, str] | None = None,
    static_dir: Path | str | None = None,
) -> FastAPI:
    """App over one store and one QA pool; tokens map annotator_id -> opaque token."""
    excerpts = excerpts or {}
    tokens = tokens or {}
    app = FastAPI(title="annotation service")

    def _authorize(annotator_id: str, token: str | None) -> None:
        if not tokens:
            return
        if tokens.get(annotator_id) != token:
            raise HTTPException(status_code=401, detail={"error": "BadToken"})

    @app.get("/api/rubric")
    def rubric() -> dict:
        return RUBRIC

    @app.get("/api/batches/{annotator_id}")
    def batches(annotator_id: str, x_annotator_token: str | None = Header(default=None)) -> dict:
        _authorize(annotator_id, x_annotator_token)
        out = []
        for batch in store.batches_for(annotator_id):
            tasks = []
            for qa_id in batch.qa_ids:
                pair = pool.get(qa_id)
                if pair is None:
                    continue
                annotated = store.record_for(qa_id, annotator_id) is not None
                tasks.append(_task_view(pair, excerpts.get(qa_id, ""), annotated))
            out.append(
                {
                    "batch_id": batch.batch_id,
                    "language": batch.language,
                    "size": len(batch.qa_ids),
                    "completed": sum(1 for t in tasks if t["annotated"]),
                    "tasks": tasks,
                }
            )
        return {"annotator": annotator_id, "batches": out}

    @app.get("/api/task/{qa_id}")
    def task(qa_id: str) -> dict:
        pair = pool.get(qa_id)
        if pair is None:
            raise HTTPException(status_code=404, detail={"error": "UnknownTask"})
        view = _task_view(pair, excerpts.get(qa_id, ""), annotated=False)
        view["provenance"] = pair.to_dict()["provenance"]
        view["keyword"] = pair.keyword
        return view

    @app.post("/api/annotations")
    def submit(body: AnnotationIn, x_annotator_token: str | None = Header(default=None)) -> JSONResponse:
        _authorize(body.annotator_id, x_annotator_token)
        record = AnnotationRecord(
            qa_id=body.qa_id,
            annotator_id=body.annotator_id,
            clarity=body.clarity,
            relevance=body.relevance,
            answer_quality=body.answer_quality,
        )
        try:
            revision = store.submit(record)
        except ScoreOutOfRange as exc:
            return JSONResponse(status_code=400, content={"error": "ScoreOutOfRange", "detail": str(exc)})
        except NotAssigned as exc:
            return JSONResponse(status_code=403, content={"error": "NotAssigned", "detail": str(exc)})
        return JSONResponse(content={"revision": revision})

    @app.get("/api/stats")
    def stats() -> dict:
        table = acceptance_rates(store.records(), store.batches.values())
        return table.to_dict()

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
