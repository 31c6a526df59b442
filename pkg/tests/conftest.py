from __future__ import annotations

from datetime import datetime, timezone

import pytest

from crossdoc.engine import AnnotationEngine, QueueConfig
from crossdoc.model import Document, DocumentPair


def make_doc(doc_id: str, kind: str, text: str, **kwargs) -> Document:
    return Document(
        doc_id=doc_id,
        kind=kind,
        title=kwargs.pop("title", f"title of {doc_id}"),
        summary_text=text,
        **kwargs,
    )


def make_pair(
    pair_id: str = "p1",
    news_text: str = "blood from recovered patients helps treat the sick",
    sci_text: str = "convalescent plasma derived from donors treats patients",
    split: str | None = None,
) -> DocumentPair:
    return DocumentPair(
        pair_id=pair_id,
        news_doc=make_doc(f"{pair_id}-news", "news", news_text),
        sci_doc=make_doc(f"{pair_id}-sci", "science", sci_text),
        created_at=datetime(2020, 6, 1, tzinfo=timezone.utc),
        split=split,
    )


def make_engine(seed: int = 42, **config_kwargs) -> AnnotationEngine:
    engine = AnnotationEngine()
    engine.configure(QueueConfig(sampling_seed=seed, **config_kwargs))
    return engine


@pytest.fixture
def pair() -> DocumentPair:
    return make_pair()


@pytest.fixture
def engine() -> AnnotationEngine:
    return make_engine(iaa_fraction=0.0)
