"""HTTP surface for the annotation workbench.

All bodies are JSON; pair keys travel as two-element arrays of mention ids.
Protocol rules live entirely in the engine: this layer translates requests
and maps domain errors onto status codes (409 for stale claims, duplicates
and conflicts; 404 for unknown ids; 422 for bad inputs).
"""

from __future__ import annotations

import io
import json
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Query, Response
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .errors import (
    ConflictError,
    CrossDocumentError,
    CrossdocError,
    DuplicatePairError,
    SpanError,
    StaleClaimError,
    UnknownPairError,
)
from .metrics import write_cluster_file
from .store import Store


class AnnotationIn(BaseModel):
    annotator: str
    pair_key: list[str] = Field(min_length=2, max_length=2)
    verdict: str
    difficult: bool = False
    idempotency_token: Optional[str] = None


class ProposalIn(BaseModel):
    annotator: str
    shown_pair_key: list[str] = Field(min_length=2, max_length=2)
    doc_id: str
    start_char: int
    end_char: int


class SpanIn(BaseModel):
    annotator: str
    mention_id: str
    start_char: int
    end_char: int


def _http_error(exc: CrossdocError) -> HTTPException:
    if isinstance(exc, (StaleClaimError, DuplicatePairError, ConflictError)):
        return HTTPException(status_code=409, detail=str(exc))
    if isinstance(exc, UnknownPairError):
        return HTTPException(status_code=404, detail=str(exc))
    return HTTPException(status_code=422, detail=str(exc))


def create_app(store: Store, static_dir: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="crossdoc annotation service")
    engine = store.engine

    @app.get("/api/task")
    def get_task(annotator: str = Query(...)):
        payload = engine.serve_task(annotator)
        if payload is None:
            return Response(status_code=204)
        return payload

    @app.post("/api/annotation")
    def post_annotation(body: AnnotationIn):
        try:
            delta = engine.submit_annotation(
                body.annotator,
                tuple(body.pair_key),
                body.verdict,
                difficult=body.difficult,
                idempotency_token=body.idempotency_token,
            )
        except CrossdocError as exc:
            raise _http_error(exc) from exc
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        doc = delta.to_doc()
        doc["replayed_token"] = delta.replayed_token
        return doc

    @app.post("/api/pair")
    def post_pair(body: ProposalIn):
        try:
            pair = engine.propose_pair(
                body.annotator,
                tuple(body.shown_pair_key),
                body.doc_id,
                body.start_char,
                body.end_char,
            )
        except (CrossDocumentError, SpanError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except CrossdocError as exc:
            raise _http_error(exc) from exc
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return {
            "pair_key": list(pair.pair_key),
            "pair_id": pair.pair_id,
            "similarity": pair.similarity,
            "iaa": pair.iaa,
        }

    @app.post("/api/span")
    def post_span(body: SpanIn):
        try:
            mention = engine.adjust_span(
                body.annotator, body.mention_id, body.start_char, body.end_char
            )
        except SpanError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except ConflictError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return {
            "mention_id": mention.mention_id,
            "doc_id": mention.doc_id,
            "start_char": mention.start_char,
            "end_char": mention.end_char,
            "surface": mention.surface,
        }

    @app.get("/api/stats/agreement")
    def stats_agreement():
        return store.agreement_report().to_doc()

    @app.get("/api/stats/corpus")
    def stats_corpus():
        return store.validate().to_doc()

    @app.get("/api/export/clusters", response_class=PlainTextResponse)
    def export_clusters(split: Optional[str] = None):
        buf = io.StringIO()
        write_cluster_file(buf, store.export_clusters(split=split))
        return buf.getvalue()

    @app.get("/api/export/difficult", response_class=PlainTextResponse)
    def export_difficult():
        return "".join(json.dumps(row) + "\n" for row in store.difficult_pairs())

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app


def serve(store: Store, host: str = "127.0.0.1", port: int = 8400,
          static_dir: Optional[Path] = None) -> None:
    """Run the HTTP service until interrupted; flushes the log on shutdown."""
    import uvicorn

    app = create_app(store, static_dir=static_dir)
    try:
        uvicorn.run(app, host=host, port=port, log_level="info")
    finally:
        store.close()
