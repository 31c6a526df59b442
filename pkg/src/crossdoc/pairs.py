"""Candidate pair generation, scoring and ranking.

Every cross-document mention combination for a document pair becomes a
candidate; candidates are scored by cosine similarity of mean-pooled token
vectors when an embedding table is present and ranked most-similar first
for the annotation queue.
"""

from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .errors import DegenerateVectorError, EmptySpanError
from .ingest import EmbeddingTable
from .model import CandidatePair, DocumentPair, Mention, PairKey, pair_key

log = logging.getLogger(__name__)

RANK_SIMILARITY = "similarity"
RANK_STRATIFIED = "stratified"


def span_vector(mention: Mention, table: EmbeddingTable) -> np.ndarray:
    """Mean of the token vectors covered by the mention's token span."""
    if mention.token_span is None:
        raise EmptySpanError(
            f"mention {mention.mention_id!r} covers no tokens in the embedding table"
        )
    first, last = mention.token_span
    vectors = table.vectors.get(mention.doc_id)
    if vectors is None or not (0 <= first <= last < len(vectors)):
        raise EmptySpanError(
            f"mention {mention.mention_id!r} token span {mention.token_span} "
            f"is outside the table for {mention.doc_id!r}"
        )
    return vectors[first : last + 1].astype(np.float64).mean(axis=0)


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """dot(u, v) / (|u| |v|), clamped to [-1, 1] against rounding."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise DegenerateVectorError(f"dimension mismatch: {u.shape} vs {v.shape}")
    if not (np.isfinite(u).all() and np.isfinite(v).all()):
        raise DegenerateVectorError("non-finite vector")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise DegenerateVectorError("zero vector has no direction")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def score_mention_pairs(
    news_mentions: Sequence[Mention],
    sci_mentions: Sequence[Mention],
    table: EmbeddingTable,
) -> dict[PairKey, float]:
    """Similarities for every scorable news x science mention combination.

    Mentions without covered tokens are skipped (their pairs stay unscored).
    """
    def pooled(mentions):
        vecs, kept = [], []
        for m in mentions:
            try:
                vecs.append(span_vector(m, table))
                kept.append(m)
            except EmptySpanError:
                continue
        return vecs, kept

    news_vecs, news_kept = pooled(news_mentions)
    sci_vecs, sci_kept = pooled(sci_mentions)
    if not news_kept or not sci_kept:
        return {}
    sims = _kernels.cosine_matrix(np.vstack(news_vecs), np.vstack(sci_vecs))
    return {
        pair_key(a, b): float(sims[i, j])
        for i, a in enumerate(news_kept)
        for j, b in enumerate(sci_kept)
    }


def generate_candidates(
    pair: DocumentPair,
    news_mentions: Sequence[Mention],
    sci_mentions: Sequence[Mention],
    table: Optional[EmbeddingTable] = None,
    existing_keys: Optional[set[PairKey]] = None,
    iaa_for: Optional[callable] = None,
) -> list[CandidatePair]:
    """All cross-document mention combinations not already stored.

    Yields |news| x |science| pairs minus existing keys, scored when a table
    is available. Candidates are never generated within one document.
    """
    if not news_mentions or not sci_mentions:
        log.warning(
            "pair %s: no mentions for %s document, generating nothing",
            pair.pair_id,
            "news" if not news_mentions else "science",
        )
        return []
    existing = existing_keys or set()
    sims = (
        score_mention_pairs(news_mentions, sci_mentions, table) if table is not None else {}
    )
    out = []
    for a in news_mentions:
        for b in sci_mentions:
            key = pair_key(a, b)
            if key in existing:
                continue
            out.append(
                CandidatePair(
                    pair_key=key,
                    pair_id=pair.pair_id,
                    similarity=sims.get(key),
                    iaa=bool(iaa_for(key)) if iaa_for is not None else False,
                )
            )
    return out


def rank_candidates(
    pairs: Sequence[CandidatePair], mode: str = RANK_SIMILARITY
) -> list[CandidatePair]:
    """Deterministic total order for the annotation queue.

    Scored pairs come first, descending by similarity with ties broken by
    ascending pair key; unscored pairs follow in pair-key order. Stratified
    mode interleaves the top/middle/bottom thirds of the scored ranking so
    annotators see positives and negatives early; it is off by default.
    """
    scored = sorted(
        (p for p in pairs if p.similarity is not None),
        key=lambda p: (-p.similarity, p.pair_key),
    )
    unscored = sorted((p for p in pairs if p.similarity is None), key=lambda p: p.pair_key)
    if mode == RANK_STRATIFIED and len(scored) >= 3:
        third = len(scored) // 3
        top, middle, bottom = scored[:third], scored[third : 2 * third], scored[2 * third :]
        interleaved = []
        for i in range(len(bottom)):
            if i < len(top):
                interleaved.append(top[i])
            if i < len(middle):
                interleaved.append(middle[i])
            interleaved.append(bottom[i])
        scored = interleaved
    return scored + unscored
