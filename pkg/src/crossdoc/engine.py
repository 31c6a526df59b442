"""Annotation protocol state machine.

One logical writer owns all mutations: every state change is an event
record (dict with seq/ts/kind/payload) that is appended to a sink and then
applied. Replaying the same records onto a fresh engine reproduces the
durable state exactly; similarities and sampling decisions are computed
once, in the public operation, and carried in the payload so replay never
recomputes them.

Claims are deliberately ephemeral: they live in memory only, expire with
their lease, and vanish on restart, which returns abandoned tasks to the
queue.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field, asdict
from datetime import date, datetime, timedelta, timezone
from typing import Callable, Optional

from . import pairs as pairgen
from .errors import (
    ConflictError,
    CrossDocumentError,
    DuplicatePairError,
    EmptySpanError,
    InsufficientDataError,
    SpanError,
    StaleClaimError,
    UnknownPairError,
)
from .ingest import EmbeddingTable
from .model import (
    CandidatePair,
    ClusterSet,
    Document,
    DocumentPair,
    GOLD_COREFERENT,
    GOLD_NOT_COREFERENT,
    GOLD_UNRESOLVED,
    Mention,
    PairKey,
    STATUS_CLAIMED,
    STATUS_PENDING,
    STATUS_RESOLVED,
    VERDICT_NO,
    VERDICT_YES,
    check_span,
    key_of_ids,
    make_mention,
    resolve_token_span,
    span_overlap,
)


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


@dataclass(frozen=True)
class QueueConfig:
    """Queue behaviour knobs; the sampling seed pins IAA membership."""

    sampling_seed: int
    iaa_fraction: float = 0.05
    weekly_iaa_cap: int = 150
    claim_lease_minutes: float = 15.0
    ranking_mode: str = pairgen.RANK_SIMILARITY

    def __post_init__(self):
        if not 0.0 <= self.iaa_fraction <= 1.0:
            raise ValueError("iaa_fraction must lie in [0, 1]")
        if self.weekly_iaa_cap < 0:
            raise ValueError("weekly_iaa_cap must be >= 0")
        if self.claim_lease_minutes <= 0:
            raise ValueError("claim_lease_minutes must be positive")

    def to_doc(self) -> dict:
        return asdict(self)

    @classmethod
    def from_doc(cls, doc: dict) -> "QueueConfig":
        return cls(**doc)


def sample_iaa(key: PairKey, config: QueueConfig) -> bool:
    """Stable pseudo-random IAA membership for a pair.

    A seeded hash of the pair key is mapped to [0, 1) and compared against
    the configured fraction, so membership never changes as the corpus
    grows and is identical on every replay.
    """
    digest = hashlib.blake2b(
        f"{config.sampling_seed}\x1f{key[0]}\x1f{key[1]}".encode("utf-8"),
        digest_size=8,
    ).digest()
    u = int.from_bytes(digest, "big") / 2**64
    return u < config.iaa_fraction


@dataclass(frozen=True)
class ConflictReport:
    """A verdict that contradicts the transitively-closed cluster state."""

    seq: int
    pair_key: PairKey
    annotator_id: str
    reason: str
    cluster_id: str

    def to_doc(self) -> dict:
        return {
            "seq": self.seq,
            "pair_key": list(self.pair_key),
            "annotator_id": self.annotator_id,
            "reason": self.reason,
            "cluster_id": self.cluster_id,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ConflictReport":
        return cls(
            seq=doc["seq"],
            pair_key=tuple(doc["pair_key"]),
            annotator_id=doc["annotator_id"],
            reason=doc["reason"],
            cluster_id=doc["cluster_id"],
        )


@dataclass(frozen=True)
class AnnotatorState:
    """Queue-facing view of one annotator at a point in time."""

    annotator_id: str
    iaa_completed_this_week: int
    claims: tuple[tuple[PairKey, datetime], ...]


@dataclass
class StateDelta:
    """What one submission changed."""

    seq: int
    pair_key: PairKey
    gold: Optional[str] = None
    resolved: bool = False
    merged_cluster: Optional[tuple[str, tuple[str, ...]]] = None
    conflict: Optional[ConflictReport] = None
    superseded_previous: bool = False
    replayed_token: bool = False

    def to_doc(self) -> dict:
        return {
            "seq": self.seq,
            "pair_key": list(self.pair_key),
            "gold": self.gold,
            "resolved": self.resolved,
            "merged_cluster": (
                [self.merged_cluster[0], list(self.merged_cluster[1])]
                if self.merged_cluster
                else None
            ),
            "conflict": self.conflict.to_doc() if self.conflict else None,
            "superseded_previous": self.superseded_previous,
        }


@dataclass
class CorpusState:
    """Everything durable: corpus, queue state, clusters, verdict history."""

    config: Optional[QueueConfig] = None
    documents: dict[str, Document] = field(default_factory=dict)
    document_pairs: dict[str, DocumentPair] = field(default_factory=dict)
    doc_to_pair: dict[str, str] = field(default_factory=dict)
    mentions: dict[str, Mention] = field(default_factory=dict)
    active: dict[str, list[str]] = field(default_factory=dict)
    superseded: dict[str, str] = field(default_factory=dict)
    embeddings: dict[str, EmbeddingTable] = field(default_factory=dict)
    pairs: dict[PairKey, CandidatePair] = field(default_factory=dict)
    clusters: ClusterSet = field(default_factory=ClusterSet)
    verdicts: dict[tuple[str, PairKey], tuple[str, bool, int]] = field(default_factory=dict)
    verdict_index: dict[PairKey, dict[str, str]] = field(default_factory=dict)
    difficult_by: dict[PairKey, set[str]] = field(default_factory=dict)
    auto_difficult: set[PairKey] = field(default_factory=set)
    conflicts: list[ConflictReport] = field(default_factory=list)
    idempotency: dict[str, dict] = field(default_factory=dict)
    iaa_week_counts: dict[tuple[str, int, int], int] = field(default_factory=dict)

    def active_mentions(self, doc_id: str) -> list[Mention]:
        return [self.mentions[m] for m in self.active.get(doc_id, [])]

    def active_mention_count(self) -> int:
        return sum(len(v) for v in self.active.values())

    def effective_verdicts(self, key: PairKey) -> dict[str, str]:
        return dict(self.verdict_index.get(key, {}))

    def pair_difficult(self, key: PairKey) -> bool:
        return bool(self.difficult_by.get(key)) or key in self.auto_difficult


class AnnotationEngine:
    """Single-writer protocol engine over a CorpusState.

    All public operations are serialized by one lock; ``next_task`` plus its
    claim is atomic under it. Reads of returned values are snapshots.
    """

    def __init__(self, sink: Optional[Callable[[dict], None]] = None):
        self.state = CorpusState()
        self._sink = sink
        self._seq = 0
        self._lock = threading.RLock()
        # (pair_key, annotator) -> lease expiry; in-memory only
        self._claims: dict[tuple[PairKey, str], datetime] = {}
        self._rank_cache: Optional[list[PairKey]] = None
        self._last_delta: Optional[StateDelta] = None

    # -- configuration ------------------------------------------------------

    @property
    def config(self) -> QueueConfig:
        if self.state.config is None:
            raise RuntimeError("engine is not configured; emit a config event first")
        return self.state.config

    def configure(self, config: QueueConfig) -> None:
        with self._lock:
            current = self.state.config
            if current is not None and current.sampling_seed != config.sampling_seed:
                raise ConflictError(
                    "sampling_seed is immutable once the store exists "
                    f"({current.sampling_seed} vs {config.sampling_seed})"
                )
            if current != config:
                self._emit("config", config.to_doc())

    # -- event plumbing -----------------------------------------------------

    def _emit(self, kind: str, payload: dict, ts: Optional[datetime] = None) -> dict:
        record = {
            "seq": self._seq + 1,
            "ts": (ts or utcnow()).isoformat(),
            "kind": kind,
            "payload": payload,
        }
        if self._sink is not None:
            self._sink(record)
        self.apply_record(record)
        return record

    def apply_record(self, record: dict) -> None:
        """Apply one event record; used both for live emits and for replay."""
        with self._lock:
            seq = record["seq"]
            if seq != self._seq + 1:
                raise ConflictError(f"event seq {seq} does not follow {self._seq}")
            handler = getattr(self, f"_apply_{record['kind']}", None)
            if handler is None:
                raise ConflictError(f"unknown event kind {record['kind']!r}")
            handler(record)
            self._seq = seq

    @property
    def last_seq(self) -> int:
        return self._seq

    # -- ingestion-facing operations ----------------------------------------

    def ingest_pair(self, pair: DocumentPair) -> bool:
        """Store a document pair; identical re-ingest is a no-op."""
        with self._lock:
            existing = self.state.document_pairs.get(pair.pair_id)
            if existing is not None:
                if self._pair_content(existing) == self._pair_content(pair):
                    return False
                raise ConflictError(
                    f"pair {pair.pair_id!r} already stored with different content"
                )
            for doc in (pair.news_doc, pair.sci_doc):
                owner = self.state.doc_to_pair.get(doc.doc_id)
                if owner is not None and owner != pair.pair_id:
                    raise ConflictError(
                        f"document {doc.doc_id!r} already belongs to pair {owner!r}"
                    )
            self._emit("ingest_pair", {"pair": _pair_to_doc(pair)})
            return True

    @staticmethod
    def _pair_content(pair: DocumentPair) -> dict:
        doc = _pair_to_doc(pair)
        doc.pop("created_at", None)
        return doc

    def add_mention(self, doc_id: str, start_char: int, end_char: int) -> Optional[str]:
        """Store a mention span; exact duplicates dedupe to the existing id."""
        with self._lock:
            doc = self.state.documents.get(doc_id)
            if doc is None:
                raise KeyError(f"unknown document {doc_id!r}")
            check_span(start_char, end_char, limit=len(doc.summary_text))
            mention = make_mention(doc, start_char, end_char, self._token_ranges(doc_id))
            if mention.mention_id in self.state.active.get(doc_id, []):
                return None
            self._emit(
                "add_mention",
                {
                    "doc_id": doc_id,
                    "start_char": start_char,
                    "end_char": end_char,
                    "mention_id": mention.mention_id,
                    "token_span": list(mention.token_span) if mention.token_span else None,
                },
            )
            return mention.mention_id

    def add_embeddings(self, table: EmbeddingTable) -> None:
        """Store an embedding table and resolve/re-score everything it touches."""
        with self._lock:
            if table.pair_id not in self.state.document_pairs:
                raise KeyError(f"unknown document pair {table.pair_id!r}")
            existing = self.state.embeddings.get(table.pair_id)
            if existing is not None and existing.to_doc() == table.to_doc():
                return  # identical re-ingest is a no-op
            resolved = {}
            for doc_id, ranges in table.tokens.items():
                for m in self.state.active_mentions(doc_id):
                    span = resolve_token_span(m.start_char, m.end_char, ranges)
                    resolved[m.mention_id] = list(span) if span else None
            rescored = self._rescore_with_table(table)
            self._emit(
                "add_embeddings",
                {
                    "table": table.to_doc(),
                    "token_spans": resolved,
                    "rescored": {_key_str(k): s for k, s in rescored.items()},
                },
            )

    def _rescore_with_table(self, table: EmbeddingTable) -> dict[PairKey, float]:
        dp = self.state.document_pairs[table.pair_id]
        news_id, sci_id = dp.doc_ids

        def with_spans(doc_id):
            out = []
            for m in self.state.active_mentions(doc_id):
                span = resolve_token_span(
                    m.start_char, m.end_char, table.doc_tokens(doc_id)
                )
                if span is not None:
                    out.append(
                        Mention(
                            mention_id=m.mention_id,
                            doc_id=m.doc_id,
                            start_char=m.start_char,
                            end_char=m.end_char,
                            surface=m.surface,
                            token_span=span,
                        )
                    )
            return out

        sims = pairgen.score_mention_pairs(with_spans(news_id), with_spans(sci_id), table)
        # refresh every pending unanswered pair; answered/resolved pairs keep
        # the similarity they were annotated under
        return {
            key: sim
            for key, sim in sims.items()
            if key in self.state.pairs
            and self.state.pairs[key].status == STATUS_PENDING
            and not self.state.effective_verdicts(key)
        }

    def generate_candidates(self, pair_id: str) -> list[CandidatePair]:
        """Create every new cross-document candidate for one document pair."""
        with self._lock:
            dp = self.state.document_pairs.get(pair_id)
            if dp is None:
                raise KeyError(f"unknown document pair {pair_id!r}")
            news_id, sci_id = dp.doc_ids
            candidates = pairgen.generate_candidates(
                dp,
                self.state.active_mentions(news_id),
                self.state.active_mentions(sci_id),
                table=self.state.embeddings.get(pair_id),
                existing_keys=set(self.state.pairs),
                iaa_for=lambda key: sample_iaa(key, self.config),
            )
            if candidates:
                self._emit(
                    "add_candidates",
                    {
                        "pair_id": pair_id,
                        "candidates": [
                            {
                                "key": list(c.pair_key),
                                "similarity": c.similarity,
                                "iaa": c.iaa,
                            }
                            for c in candidates
                        ],
                    },
                )
            return candidates

    # -- queue --------------------------------------------------------------

    def _prune_claims(self, now: datetime) -> None:
        expired = [ck for ck, expiry in self._claims.items() if expiry <= now]
        for ck in expired:
            del self._claims[ck]

    def _claimed_by_any(self, key: PairKey) -> bool:
        return any(k == key for (k, _a) in self._claims)

    def _week(self, annotator: str, now: datetime) -> tuple[str, int, int]:
        iso = now.astimezone(timezone.utc).isocalendar()
        return (annotator, iso[0], iso[1])

    def iaa_completed_this_week(self, annotator: str, now: Optional[datetime] = None) -> int:
        now = now or utcnow()
        return self.state.iaa_week_counts.get(self._week(annotator, now), 0)

    def pair_status(self, key: PairKey, now: Optional[datetime] = None) -> str:
        """Stored status, or "claimed" while a live lease covers the pair."""
        with self._lock:
            self._prune_claims(now or utcnow())
            pair = self.state.pairs.get(key)
            if pair is None:
                raise UnknownPairError(f"unknown pair {key}")
            if pair.status == STATUS_PENDING and self._claimed_by_any(key):
                return STATUS_CLAIMED
            return pair.status

    def annotator_state(self, annotator: str, now: Optional[datetime] = None) -> AnnotatorState:
        with self._lock:
            now = now or utcnow()
            self._prune_claims(now)
            return AnnotatorState(
                annotator_id=annotator,
                iaa_completed_this_week=self.iaa_completed_this_week(annotator, now),
                claims=tuple(
                    (k, expiry) for (k, a), expiry in self._claims.items() if a == annotator
                ),
            )

    def _ranked_keys(self) -> list[PairKey]:
        if self._rank_cache is None:
            ordered = pairgen.rank_candidates(
                list(self.state.pairs.values()), mode=self.config.ranking_mode
            )
            self._rank_cache = [p.pair_key for p in ordered]
        return self._rank_cache

    def next_task(self, annotator: str, now: Optional[datetime] = None) -> Optional[CandidatePair]:
        """First eligible pair for this annotator, claimed with a lease.

        IAA pairs the annotator has not answered come first while the weekly
        cap allows; then the annotator's own counter-proposals; then pending
        pairs in rank order that nobody has claimed or answered.
        """
        with self._lock:
            now = now or utcnow()
            self._prune_claims(now)
            state = self.state
            under_cap = (
                self.iaa_completed_this_week(annotator, now) < self.config.weekly_iaa_cap
            )

            if under_cap:
                held_iaa = [
                    k
                    for (k, a) in self._claims
                    if a == annotator and state.pairs[k].iaa
                    and (annotator, k) not in state.verdicts
                ]
                if held_iaa:
                    return state.pairs[held_iaa[0]]
                for key in self._ranked_keys():
                    pair = state.pairs[key]
                    if pair.iaa and (annotator, key) not in state.verdicts:
                        return self._claim(pair, annotator, now)

            held = [
                k for (k, a) in self._claims if a == annotator and not state.pairs[k].iaa
            ]
            if held:
                return state.pairs[held[0]]

            own = sorted(
                (
                    p
                    for p in state.pairs.values()
                    if not p.iaa
                    and p.status == STATUS_PENDING
                    and p.proposed_by == annotator
                    and not self.state.effective_verdicts(p.pair_key)
                    and not self._claimed_by_any(p.pair_key)
                ),
                key=lambda p: p.proposal_seq,
            )
            if own:
                return self._claim(own[0], annotator, now)

            for key in self._ranked_keys():
                pair = state.pairs[key]
                if pair.iaa or pair.status != STATUS_PENDING:
                    continue
                if self._claimed_by_any(key):
                    continue
                if state.effective_verdicts(key):
                    continue
                return self._claim(pair, annotator, now)
            return None

    def _claim(self, pair: CandidatePair, annotator: str, now: datetime) -> CandidatePair:
        lease = timedelta(minutes=self.config.claim_lease_minutes)
        self._claims[(pair.pair_key, annotator)] = now + lease
        return pair

    def live_claims(self) -> dict[tuple[PairKey, str], datetime]:
        with self._lock:
            return dict(self._claims)

    def serve_task(self, annotator: str, now: Optional[datetime] = None) -> Optional[dict]:
        """Claim the next task and return the full payload the UI renders.

        The payload carries both summaries, the active pair's offsets (bold),
        the offsets of mentions already co-clustered with either side (green),
        the difficult-flag state and queue counters.
        """
        with self._lock:
            now = now or utcnow()
            pair = self.next_task(annotator, now)
            if pair is None:
                return None
            state = self.state
            key = pair.pair_key
            dp = state.document_pairs[pair.pair_id]
            mention_by_role = {}
            for mid in key:
                mention = state.mentions[mid]
                role = "news" if mention.doc_id == dp.news_doc.doc_id else "science"
                mention_by_role[role] = mention

            active_ids = set(key)
            doc_ids = set(dp.doc_ids)
            green = []
            for mid in key:
                for member in sorted(state.clusters.members(mid) - active_ids):
                    m = state.mentions.get(member)
                    if m is None or m.doc_id not in doc_ids:
                        continue
                    green.append(
                        {
                            "mention_id": m.mention_id,
                            "doc_id": m.doc_id,
                            "start_char": m.start_char,
                            "end_char": m.end_char,
                            "surface": m.surface,
                        }
                    )

            pending = [
                k
                for k in self._ranked_keys()
                if state.pairs[k].status == STATUS_PENDING
                and not state.effective_verdicts(k)
            ]
            iaa_remaining = sum(
                1
                for k, p in state.pairs.items()
                if p.iaa and (annotator, k) not in state.verdicts
            )

            def mention_doc(m: Mention) -> dict:
                return {
                    "mention_id": m.mention_id,
                    "doc_id": m.doc_id,
                    "start_char": m.start_char,
                    "end_char": m.end_char,
                    "surface": m.surface,
                }

            def document_doc(d: Document) -> dict:
                return {
                    "doc_id": d.doc_id,
                    "kind": d.kind,
                    "title": d.title,
                    "summary_text": d.summary_text,
                    "has_full_text": d.full_text is not None,
                    "full_text": d.full_text,
                    "url": d.url,
                }

            return {
                "pair_key": list(key),
                "pair_id": pair.pair_id,
                "iaa": pair.iaa,
                "iaa_due": pair.iaa,
                "status": self.pair_status(key, now),
                "similarity": pair.similarity,
                "difficult": state.pair_difficult(key),
                "documents": {
                    "news": document_doc(dp.news_doc),
                    "science": document_doc(dp.sci_doc),
                },
                "mentions": {
                    role: mention_doc(m) for role, m in mention_by_role.items()
                },
                "co_clustered": green,
                "queue": {
                    "position": (pending.index(key) + 1) if key in pending else 1,
                    "pending_total": len(pending),
                    "iaa_remaining_for_you": iaa_remaining,
                    "iaa_completed_this_week": self.iaa_completed_this_week(annotator, now),
                },
                "claim_expires": self._claims[(key, annotator)].isoformat(),
            }

    # -- submission ---------------------------------------------------------

    def submit_annotation(
        self,
        annotator: str,
        key: PairKey,
        verdict: str,
        difficult: bool = False,
        now: Optional[datetime] = None,
        idempotency_token: Optional[str] = None,
    ) -> StateDelta:
        """Record a verdict, releasing the claim and updating clusters.

        Non-IAA pairs resolve immediately: yes merges the two mentions'
        clusters, no records the negative. IAA pairs defer their gold label
        to the running consensus over all annotators' latest verdicts.
        """
        if verdict not in (VERDICT_YES, VERDICT_NO):
            raise ValueError(f"verdict must be yes or no, got {verdict!r}")
        with self._lock:
            now = now or utcnow()
            if idempotency_token and idempotency_token in self.state.idempotency:
                doc = self.state.idempotency[idempotency_token]
                delta = _delta_from_doc(doc)
                delta.replayed_token = True
                return delta
            pair = self.state.pairs.get(key)
            if pair is None:
                raise UnknownPairError(f"unknown pair {key}")
            self._prune_claims(now)
            resubmission = (annotator, key) in self.state.verdicts
            has_claim = (key, annotator) in self._claims
            if pair.iaa:
                # unanswered IAA pairs are implicitly eligible; only the cap gates
                if self.iaa_completed_this_week(annotator, now) >= self.config.weekly_iaa_cap:
                    raise StaleClaimError("weekly IAA cap reached")
            elif not (has_claim or resubmission):
                raise StaleClaimError(f"no live claim on {key}")

            self._emit(
                "annotation",
                {
                    "annotator": annotator,
                    "key": list(key),
                    "verdict": verdict,
                    "difficult": bool(difficult),
                    "idempotency_token": idempotency_token,
                },
                ts=now,
            )
            return self._last_delta

    def consensus_gold(self, key: PairKey) -> str:
        """Majority gold label over an IAA pair's latest per-annotator verdicts."""
        with self._lock:
            pair = self.state.pairs.get(key)
            if pair is None:
                raise UnknownPairError(f"unknown pair {key}")
            if not pair.iaa:
                raise InsufficientDataError(f"pair {key} is not an IAA pair")
            verdicts = self.state.effective_verdicts(key)
            if len(verdicts) < 2:
                raise InsufficientDataError(
                    f"need at least 2 verdicts for consensus, have {len(verdicts)}"
                )
            return _majority(list(verdicts.values()))

    # -- counter-proposals and span edits ------------------------------------

    def propose_pair(
        self,
        annotator: str,
        shown_key: PairKey,
        doc_id: str,
        start_char: int,
        end_char: int,
        now: Optional[datetime] = None,
    ) -> CandidatePair:
        """Pair an alternative mention against the shown pair's counterpart.

        The alternative lives in ``doc_id``; its counterpart is the shown
        pair's mention in the other document. Rejected when it duplicates an
        existing pair key or span-overlaps both sides of an already-annotated
        pair for the same documents.
        """
        with self._lock:
            shown = self.state.pairs.get(shown_key)
            if shown is None:
                raise UnknownPairError(f"unknown pair {shown_key}")
            dp = self.state.document_pairs[shown.pair_id]
            if doc_id not in dp.doc_ids:
                raise CrossDocumentError(
                    f"document {doc_id!r} is not part of pair {shown.pair_id!r}"
                )
            other_doc = dp.other_doc_id(doc_id)
            counterpart_id = next(
                m for m in shown_key if self.state.mentions[m].doc_id == other_doc
            )
            counterpart = self.state.mentions[counterpart_id]

            doc = self.state.documents[doc_id]
            check_span(start_char, end_char, limit=len(doc.summary_text))
            mention = make_mention(doc, start_char, end_char, self._token_ranges(doc_id))
            new_key = key_of_ids(mention.mention_id, counterpart_id)
            if new_key in self.state.pairs:
                raise DuplicatePairError(
                    f"pair {new_key} already exists", existing_key=new_key
                )
            overlap_hit = self._overlapping_annotated(
                dp.pair_id, doc_id, (start_char, end_char), counterpart
            )
            if overlap_hit is not None:
                raise DuplicatePairError(
                    f"spans overlap already-annotated pair {overlap_hit}",
                    existing_key=overlap_hit,
                )

            similarity = self._pair_similarity(mention, counterpart, dp.pair_id)
            iaa = sample_iaa(new_key, self.config)
            self._emit(
                "propose_pair",
                {
                    "annotator": annotator,
                    "shown_key": list(shown_key),
                    "mention": {
                        "doc_id": doc_id,
                        "start_char": start_char,
                        "end_char": end_char,
                        "mention_id": mention.mention_id,
                        "token_span": list(mention.token_span) if mention.token_span else None,
                    },
                    "key": list(new_key),
                    "similarity": similarity,
                    "iaa": iaa,
                },
                ts=now,
            )
            return self.state.pairs[new_key]

    def _overlapping_annotated(
        self,
        pair_id: str,
        doc_id: str,
        new_span: tuple[int, int],
        counterpart: Mention,
    ) -> Optional[PairKey]:
        """Existing annotated pair whose two spans overlap the new pair's spans."""
        for key, pair in self.state.pairs.items():
            if pair.pair_id != pair_id:
                continue
            if not self.state.effective_verdicts(key):
                continue
            side = {self.state.mentions[m].doc_id: self.state.mentions[m] for m in key}
            same_doc = side.get(doc_id)
            other = side.get(counterpart.doc_id)
            if same_doc is None or other is None:
                continue
            if span_overlap(new_span, same_doc.char_range) and span_overlap(
                counterpart.char_range, other.char_range
            ):
                return key
        return None

    def _pair_similarity(
        self, mention_a: Mention, mention_b: Mention, pair_id: str
    ) -> Optional[float]:
        table = self.state.embeddings.get(pair_id)
        if table is None:
            return None
        try:
            va = pairgen.span_vector(mention_a, table)
            vb = pairgen.span_vector(mention_b, table)
            return pairgen.cosine_similarity(va, vb)
        except EmptySpanError:
            return None

    def adjust_span(
        self,
        annotator: str,
        mention_id: str,
        new_start: int,
        new_end: int,
        now: Optional[datetime] = None,
    ) -> Mention:
        """Move or resize a mention span, versioning rather than mutating.

        Pending unanswered pairs referencing the mention are re-keyed to the
        new version and re-scored; resolved annotations keep the original
        span. Mentions inside resolved IAA pairs cannot be edited.
        """
        with self._lock:
            old = self.state.mentions.get(mention_id)
            if old is None:
                raise KeyError(f"unknown mention {mention_id!r}")
            if mention_id in self.state.superseded:
                raise SpanError(f"mention {mention_id!r} was already superseded")
            doc = self.state.documents[old.doc_id]
            check_span(new_start, new_end, limit=len(doc.summary_text))
            for key, pair in self.state.pairs.items():
                if mention_id in key and pair.iaa and pair.status == STATUS_RESOLVED:
                    raise ConflictError(
                        f"mention {mention_id!r} is part of resolved IAA pair {key}"
                    )
            if (new_start, new_end) == old.char_range:
                return old

            new_mention = make_mention(doc, new_start, new_end, self._token_ranges(old.doc_id))
            rekeyed = []
            for key, pair in list(self.state.pairs.items()):
                if mention_id not in key:
                    continue
                if pair.status != STATUS_PENDING or self.state.effective_verdicts(key):
                    continue  # answered or resolved pairs keep the original span
                other_id = key[0] if key[1] == mention_id else key[1]
                new_key = key_of_ids(new_mention.mention_id, other_id)
                duplicate = new_key in self.state.pairs
                similarity = None
                if not duplicate:
                    similarity = self._pair_similarity(
                        new_mention, self.state.mentions[other_id], pair.pair_id
                    )
                rekeyed.append(
                    {
                        "old_key": list(key),
                        "new_key": None if duplicate else list(new_key),
                        "similarity": similarity,
                        "iaa": None if duplicate else sample_iaa(new_key, self.config),
                    }
                )
            self._emit(
                "span_edit",
                {
                    "annotator": annotator,
                    "old_mention_id": mention_id,
                    "mention": {
                        "doc_id": old.doc_id,
                        "start_char": new_start,
                        "end_char": new_end,
                        "mention_id": new_mention.mention_id,
                        "token_span": (
                            list(new_mention.token_span) if new_mention.token_span else None
                        ),
                    },
                    "rekeyed": rekeyed,
                },
                ts=now,
            )
            return self.state.mentions[new_mention.mention_id]

    # -- shared helpers ------------------------------------------------------

    def _token_ranges(self, doc_id: str) -> Optional[list[tuple[int, int]]]:
        pair_id = self.state.doc_to_pair.get(doc_id)
        if pair_id is None:
            return None
        table = self.state.embeddings.get(pair_id)
        if table is None:
            return None
        return table.doc_tokens(doc_id)

    # -- apply handlers (replay-safe: payload only, no recomputation) --------

    def _apply_config(self, record: dict) -> None:
        self.state.config = QueueConfig.from_doc(record["payload"])

    def _apply_ingest_pair(self, record: dict) -> None:
        pair = _pair_from_doc(record["payload"]["pair"])
        self.state.document_pairs[pair.pair_id] = pair
        for doc in (pair.news_doc, pair.sci_doc):
            self.state.documents[doc.doc_id] = doc
            self.state.doc_to_pair[doc.doc_id] = pair.pair_id
            self.state.active.setdefault(doc.doc_id, [])

    def _apply_add_mention(self, record: dict) -> None:
        p = record["payload"]
        doc = self.state.documents[p["doc_id"]]
        mention = Mention(
            mention_id=p["mention_id"],
            doc_id=p["doc_id"],
            start_char=p["start_char"],
            end_char=p["end_char"],
            surface=doc.summary_text[p["start_char"] : p["end_char"]],
            token_span=tuple(p["token_span"]) if p["token_span"] else None,
        )
        self.state.mentions[mention.mention_id] = mention
        active = self.state.active.setdefault(mention.doc_id, [])
        if mention.mention_id not in active:
            active.append(mention.mention_id)

    def _apply_add_embeddings(self, record: dict) -> None:
        p = record["payload"]
        table = EmbeddingTable.from_doc(p["table"])
        self.state.embeddings[table.pair_id] = table
        for mention_id, span in p["token_spans"].items():
            old = self.state.mentions.get(mention_id)
            if old is not None:
                self.state.mentions[mention_id] = Mention(
                    mention_id=old.mention_id,
                    doc_id=old.doc_id,
                    start_char=old.start_char,
                    end_char=old.end_char,
                    surface=old.surface,
                    token_span=tuple(span) if span else None,
                )
        for key_str, sim in p["rescored"].items():
            key = _key_from_str(key_str)
            pair = self.state.pairs.get(key)
            if pair is not None:
                self.state.pairs[key] = pair.with_(similarity=sim)
        self._rank_cache = None

    def _apply_add_candidates(self, record: dict) -> None:
        p = record["payload"]
        for c in p["candidates"]:
            key = tuple(c["key"])
            self.state.pairs[key] = CandidatePair(
                pair_key=key,
                pair_id=p["pair_id"],
                similarity=c["similarity"],
                iaa=c["iaa"],
            )
        self._rank_cache = None

    def _apply_propose_pair(self, record: dict) -> None:
        p = record["payload"]
        self._insert_payload_mention(p["mention"])
        key = tuple(p["key"])
        shown = self.state.pairs[tuple(p["shown_key"])]
        self.state.pairs[key] = CandidatePair(
            pair_key=key,
            pair_id=shown.pair_id,
            similarity=p["similarity"],
            iaa=p["iaa"],
            proposed_by=p["annotator"],
            proposal_seq=record["seq"],
        )
        self._rank_cache = None

    def _apply_span_edit(self, record: dict) -> None:
        p = record["payload"]
        old_id = p["old_mention_id"]
        new_id = p["mention"]["mention_id"]
        self._insert_payload_mention(p["mention"])
        old = self.state.mentions[old_id]
        active = self.state.active.get(old.doc_id, [])
        if old_id in active:
            active.remove(old_id)
        self.state.superseded[old_id] = new_id
        for entry in p["rekeyed"]:
            old_key = tuple(entry["old_key"])
            pair = self.state.pairs.pop(old_key, None)
            self._claims = {
                (k, a): e for (k, a), e in self._claims.items() if k != old_key
            }
            if entry["new_key"] is None or pair is None:
                continue
            new_key = tuple(entry["new_key"])
            self.state.pairs[new_key] = pair.with_(
                pair_key=new_key, similarity=entry["similarity"], iaa=entry["iaa"]
            )
        self._rank_cache = None

    def _insert_payload_mention(self, doc: dict) -> None:
        if doc["mention_id"] in self.state.mentions:
            # span dedup hit an existing version; reactivate it
            active = self.state.active.setdefault(doc["doc_id"], [])
            if doc["mention_id"] not in active:
                active.append(doc["mention_id"])
            self.state.superseded.pop(doc["mention_id"], None)
            return
        self._apply_add_mention({"payload": doc})

    def _apply_annotation(self, record: dict) -> None:
        p = record["payload"]
        seq = record["seq"]
        ts = datetime.fromisoformat(record["ts"])
        annotator = p["annotator"]
        key: PairKey = tuple(p["key"])
        verdict = p["verdict"]
        difficult = p["difficult"]
        state = self.state
        pair = state.pairs[key]

        superseded = (annotator, key) in state.verdicts
        state.verdicts[(annotator, key)] = (verdict, difficult, seq)
        state.verdict_index.setdefault(key, {})[annotator] = verdict
        flags = state.difficult_by.setdefault(key, set())
        if difficult:
            flags.add(annotator)
        else:
            flags.discard(annotator)

        delta = StateDelta(seq=seq, pair_key=key, superseded_previous=superseded)

        if pair.iaa:
            week = self._week(annotator, ts)
            state.iaa_week_counts[week] = state.iaa_week_counts.get(week, 0) + 1
            verdicts = state.effective_verdicts(key)
            if len(verdicts) >= 2:
                gold = _majority(list(verdicts.values()))
                if gold == GOLD_UNRESOLVED:
                    state.auto_difficult.add(key)
                pair = pair.with_(gold=gold, status=STATUS_RESOLVED)
                state.pairs[key] = pair
                delta.gold = gold
                delta.resolved = True
                if gold == GOLD_COREFERENT:
                    self._merge_for(delta, key)
                elif gold == GOLD_NOT_COREFERENT:
                    self._conflict_if_coclustered(delta, key, annotator, seq)
        else:
            gold = GOLD_COREFERENT if verdict == VERDICT_YES else GOLD_NOT_COREFERENT
            pair = pair.with_(gold=gold, status=STATUS_RESOLVED)
            state.pairs[key] = pair
            delta.gold = gold
            delta.resolved = True
            if verdict == VERDICT_YES:
                self._merge_for(delta, key)
            else:
                self._conflict_if_coclustered(delta, key, annotator, seq)

        self._claims.pop((key, annotator), None)
        self._rank_cache = None
        delta_doc = delta.to_doc()
        token = p.get("idempotency_token")
        if token:
            state.idempotency[token] = delta_doc
        self._last_delta = delta

    def _merge_for(self, delta: StateDelta, key: PairKey) -> None:
        a, b = key
        changed = self.state.clusters.merge(a, b)
        if changed:
            delta.merged_cluster = (
                self.state.clusters.cluster_id(a),
                tuple(sorted(self.state.clusters.members(a))),
            )

    def _conflict_if_coclustered(
        self, delta: StateDelta, key: PairKey, annotator: str, seq: int
    ) -> None:
        a, b = key
        if self.state.clusters.together(a, b):
            conflict = ConflictReport(
                seq=seq,
                pair_key=key,
                annotator_id=annotator,
                reason="negative verdict on transitively co-clustered mentions",
                cluster_id=self.state.clusters.cluster_id(a),
            )
            self.state.conflicts.append(conflict)
            delta.conflict = conflict

    # -- durable-state serialization ------------------------------------------

    def state_fingerprint(self) -> str:
        """Hash of the durable state; identical iff replays agree bit-for-bit."""
        return hashlib.sha256(
            json.dumps(self.state_to_doc(), sort_keys=True).encode("utf-8")
        ).hexdigest()

    def state_to_doc(self) -> dict:
        s = self.state
        return {
            "seq": self._seq,
            "config": s.config.to_doc() if s.config else None,
            "document_pairs": {
                pid: _pair_to_doc(p) for pid, p in sorted(s.document_pairs.items())
            },
            "mentions": {
                mid: {
                    "doc_id": m.doc_id,
                    "start_char": m.start_char,
                    "end_char": m.end_char,
                    "token_span": list(m.token_span) if m.token_span else None,
                }
                for mid, m in sorted(s.mentions.items())
            },
            "active": {d: list(ids) for d, ids in sorted(s.active.items())},
            "superseded": dict(sorted(s.superseded.items())),
            "embeddings": {pid: t.to_doc() for pid, t in sorted(s.embeddings.items())},
            "pairs": {
                _key_str(k): {
                    "pair_id": p.pair_id,
                    "similarity": p.similarity,
                    "iaa": p.iaa,
                    "status": p.status,
                    "gold": p.gold,
                    "proposed_by": p.proposed_by,
                    "proposal_seq": p.proposal_seq,
                }
                for k, p in sorted(s.pairs.items())
            },
            "clusters": s.clusters.to_doc(),
            "verdicts": {
                f"{a}\x1f{_key_str(k)}": list(v) for (a, k), v in sorted(s.verdicts.items())
            },
            "difficult_by": {
                _key_str(k): sorted(v) for k, v in sorted(s.difficult_by.items()) if v
            },
            "auto_difficult": sorted(_key_str(k) for k in s.auto_difficult),
            "conflicts": [c.to_doc() for c in s.conflicts],
            "idempotency": dict(sorted(s.idempotency.items())),
            "iaa_week_counts": {
                f"{a}\x1f{y}\x1f{w}": c
                for (a, y, w), c in sorted(s.iaa_week_counts.items())
            },
        }

    def load_state_doc(self, doc: dict) -> None:
        """Restore durable state from a snapshot document."""
        with self._lock:
            s = CorpusState()
            s.config = QueueConfig.from_doc(doc["config"]) if doc["config"] else None
            for pid, pdoc in doc["document_pairs"].items():
                pair = _pair_from_doc(pdoc)
                s.document_pairs[pid] = pair
                for d in (pair.news_doc, pair.sci_doc):
                    s.documents[d.doc_id] = d
                    s.doc_to_pair[d.doc_id] = pid
            for mid, mdoc in doc["mentions"].items():
                text = s.documents[mdoc["doc_id"]].summary_text
                s.mentions[mid] = Mention(
                    mention_id=mid,
                    doc_id=mdoc["doc_id"],
                    start_char=mdoc["start_char"],
                    end_char=mdoc["end_char"],
                    surface=text[mdoc["start_char"] : mdoc["end_char"]],
                    token_span=tuple(mdoc["token_span"]) if mdoc["token_span"] else None,
                )
            s.active = {d: list(ids) for d, ids in doc["active"].items()}
            s.superseded = dict(doc["superseded"])
            s.embeddings = {
                pid: EmbeddingTable.from_doc(t) for pid, t in doc["embeddings"].items()
            }
            for kstr, pdoc in doc["pairs"].items():
                key = _key_from_str(kstr)
                s.pairs[key] = CandidatePair(
                    pair_key=key,
                    pair_id=pdoc["pair_id"],
                    similarity=pdoc["similarity"],
                    iaa=pdoc["iaa"],
                    status=pdoc["status"],
                    gold=pdoc["gold"],
                    proposed_by=pdoc["proposed_by"],
                    proposal_seq=pdoc["proposal_seq"],
                )
            s.clusters = ClusterSet.from_doc(doc["clusters"])
            for akey, v in doc["verdicts"].items():
                a, kstr = akey.split("\x1f", 1)
                key = _key_from_str(kstr)
                s.verdicts[(a, key)] = (v[0], v[1], v[2])
                s.verdict_index.setdefault(key, {})[a] = v[0]
            s.difficult_by = {
                _key_from_str(k): set(v) for k, v in doc["difficult_by"].items()
            }
            s.auto_difficult = {_key_from_str(k) for k in doc["auto_difficult"]}
            s.conflicts = [ConflictReport.from_doc(c) for c in doc["conflicts"]]
            s.idempotency = dict(doc["idempotency"])
            for key, count in doc["iaa_week_counts"].items():
                a, y, w = key.split("\x1f")
                s.iaa_week_counts[(a, int(y), int(w))] = count
            self.state = s
            self._seq = doc["seq"]
            self._rank_cache = None


def _majority(verdicts: list[str]) -> str:
    yes = sum(1 for v in verdicts if v == VERDICT_YES)
    no = len(verdicts) - yes
    if yes > no:
        return GOLD_COREFERENT
    if no > yes:
        return GOLD_NOT_COREFERENT
    return GOLD_UNRESOLVED


def _key_str(key: PairKey) -> str:
    return f"{key[0]}\x1f{key[1]}"


def _key_from_str(s: str) -> PairKey:
    a, b = s.split("\x1f", 1)
    return (a, b)


def _delta_from_doc(doc: dict) -> StateDelta:
    return StateDelta(
        seq=doc["seq"],
        pair_key=tuple(doc["pair_key"]),
        gold=doc["gold"],
        resolved=doc["resolved"],
        merged_cluster=(
            (doc["merged_cluster"][0], tuple(doc["merged_cluster"][1]))
            if doc["merged_cluster"]
            else None
        ),
        conflict=ConflictReport.from_doc(doc["conflict"]) if doc["conflict"] else None,
        superseded_previous=doc["superseded_previous"],
    )


def _pair_to_doc(pair: DocumentPair) -> dict:
    def doc_doc(d: Document) -> dict:
        return {
            "doc_id": d.doc_id,
            "kind": d.kind,
            "title": d.title,
            "summary_text": d.summary_text,
            "full_text": d.full_text,
            "doi": d.doi,
            "authors": list(d.authors),
            "published": d.published.isoformat() if d.published else None,
            "url": d.url,
        }

    return {
        "pair_id": pair.pair_id,
        "news": doc_doc(pair.news_doc),
        "science": doc_doc(pair.sci_doc),
        "created_at": pair.created_at.isoformat(),
        "split": pair.split,
    }


def _pair_from_doc(doc: dict) -> DocumentPair:
    def doc_from(d: dict, kind: str) -> Document:
        return Document(
            doc_id=d["doc_id"],
            kind=kind,
            title=d["title"],
            summary_text=d["summary_text"],
            full_text=d.get("full_text"),
            doi=d.get("doi"),
            authors=tuple(d.get("authors", [])),
            published=date.fromisoformat(d["published"]) if d.get("published") else None,
            url=d.get("url"),
        )

    return DocumentPair(
        pair_id=doc["pair_id"],
        news_doc=doc_from(doc["news"], "news"),
        sci_doc=doc_from(doc["science"], "science"),
        created_at=datetime.fromisoformat(doc["created_at"]),
        split=doc.get("split"),
    )
