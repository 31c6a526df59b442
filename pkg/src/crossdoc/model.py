"""Corpus data model: documents, mentions, candidate pairs, clusters.

All types are immutable values; mutation happens through the annotation
engine and store, which replace instances wholesale. Character offsets are
0-based code-point offsets into ``summary_text``, end-exclusive.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import date, datetime
from typing import Iterable, Optional

from .errors import CrossDocumentError, SpanError

NEWS = "news"
SCIENCE = "science"

PairKey = tuple[str, str]

VERDICT_YES = "yes"
VERDICT_NO = "no"

GOLD_COREFERENT = "coreferent"
GOLD_NOT_COREFERENT = "not_coreferent"
GOLD_UNRESOLVED = "unresolved"

STATUS_PENDING = "pending"
STATUS_CLAIMED = "claimed"
STATUS_RESOLVED = "resolved"


@dataclass(frozen=True)
class Document:
    doc_id: str
    kind: str
    title: str
    summary_text: str
    full_text: Optional[str] = None
    doi: Optional[str] = None
    authors: tuple[str, ...] = ()
    published: Optional[date] = None
    url: Optional[str] = None

    def __post_init__(self):
        if self.kind not in (NEWS, SCIENCE):
            raise ValueError(f"document kind must be news or science, got {self.kind!r}")
        if not self.summary_text:
            raise ValueError(f"document {self.doc_id!r} has empty summary_text")


@dataclass(frozen=True)
class DocumentPair:
    pair_id: str
    news_doc: Document
    sci_doc: Document
    created_at: datetime
    split: Optional[str] = None

    def __post_init__(self):
        if self.news_doc.kind != NEWS:
            raise ValueError(f"pair {self.pair_id!r}: news_doc.kind is {self.news_doc.kind!r}")
        if self.sci_doc.kind != SCIENCE:
            raise ValueError(f"pair {self.pair_id!r}: sci_doc.kind is {self.sci_doc.kind!r}")

    @property
    def doc_ids(self) -> tuple[str, str]:
        return (self.news_doc.doc_id, self.sci_doc.doc_id)

    def document(self, doc_id: str) -> Document:
        if doc_id == self.news_doc.doc_id:
            return self.news_doc
        if doc_id == self.sci_doc.doc_id:
            return self.sci_doc
        raise KeyError(doc_id)

    def other_doc_id(self, doc_id: str) -> str:
        news, sci = self.doc_ids
        if doc_id == news:
            return sci
        if doc_id == sci:
            return news
        raise KeyError(doc_id)


@dataclass(frozen=True)
class Mention:
    """A character span in one document's summary text.

    ``token_span`` is the inclusive index range of tokens in the document's
    embedding-table token list that overlap the character span; None when no
    embedding table has been loaded for the document.
    """

    mention_id: str
    doc_id: str
    start_char: int
    end_char: int
    surface: str
    token_span: Optional[tuple[int, int]] = None

    def __post_init__(self):
        check_span(self.start_char, self.end_char)

    @property
    def char_range(self) -> tuple[int, int]:
        return (self.start_char, self.end_char)


def mention_id_for(doc_id: str, start_char: int, end_char: int) -> str:
    """Content-addressed mention id: one id per distinct span in a document."""
    return f"{doc_id}:{start_char}-{end_char}"


def make_mention(
    doc: Document,
    start_char: int,
    end_char: int,
    token_ranges: Optional[list[tuple[int, int]]] = None,
) -> Mention:
    """Build a mention over ``doc.summary_text``, deriving surface and token span."""
    check_span(start_char, end_char, limit=len(doc.summary_text))
    token_span = None
    if token_ranges is not None:
        token_span = resolve_token_span(start_char, end_char, token_ranges)
    return Mention(
        mention_id=mention_id_for(doc.doc_id, start_char, end_char),
        doc_id=doc.doc_id,
        start_char=start_char,
        end_char=end_char,
        surface=doc.summary_text[start_char:end_char],
        token_span=token_span,
    )


def resolve_token_span(
    start_char: int, end_char: int, token_ranges: Iterable[tuple[int, int]]
) -> Optional[tuple[int, int]]:
    """Inclusive index range of tokens whose character range intersects the span.

    Any token overlapping [start_char, end_char) is included, so signal at
    partial-token boundaries is never dropped. Returns None when no token
    overlaps.
    """
    first = last = None
    for i, (ts, te) in enumerate(token_ranges):
        if span_overlap((start_char, end_char), (ts, te)):
            if first is None:
                first = i
            last = i
    if first is None:
        return None
    return (first, last)


def check_span(start: int, end: int, limit: Optional[int] = None) -> None:
    if not (0 <= start < end):
        raise SpanError(f"invalid span [{start}, {end}): require 0 <= start < end")
    if limit is not None and end > limit:
        raise SpanError(f"span [{start}, {end}) exceeds text length {limit}")


def span_overlap(a: tuple[int, int], b: tuple[int, int]) -> bool:
    """True iff the two end-exclusive ranges share at least one character."""
    check_span(*a)
    check_span(*b)
    return max(a[0], b[0]) < min(a[1], b[1])


def pair_key(mention_a: Mention, mention_b: Mention) -> PairKey:
    """Canonical unordered key for a cross-document mention pair.

    Symmetric: pair_key(a, b) == pair_key(b, a). Raises when both mentions
    live in the same document.
    """
    if mention_a.doc_id == mention_b.doc_id:
        raise CrossDocumentError(
            f"mentions {mention_a.mention_id!r} and {mention_b.mention_id!r} "
            f"are both in document {mention_a.doc_id!r}"
        )
    return key_of_ids(mention_a.mention_id, mention_b.mention_id)


def key_of_ids(id_a: str, id_b: str) -> PairKey:
    return (id_a, id_b) if id_a <= id_b else (id_b, id_a)


@dataclass(frozen=True)
class CandidatePair:
    """An unordered cross-document mention pair queued for annotation."""

    pair_key: PairKey
    pair_id: str
    similarity: Optional[float] = None
    iaa: bool = False
    status: str = STATUS_PENDING
    gold: Optional[str] = None
    difficult: bool = False
    proposed_by: Optional[str] = None
    proposal_seq: Optional[int] = None

    def with_(self, **changes) -> "CandidatePair":
        return replace(self, **changes)


@dataclass(frozen=True)
class CoreferenceCluster:
    cluster_id: str
    mention_ids: frozenset[str]


@dataclass(frozen=True)
class AnnotationEvent:
    """One annotator's verdict on a pair; append-only in the store log."""

    event_id: int
    annotator_id: str
    pair_key: PairKey
    verdict: str
    difficult: bool
    timestamp: datetime
    proposed_span_edit: Optional[tuple[str, int, int]] = None


class ClusterSet:
    """Union-find partition over mention ids.

    Cluster ids are derived from the lexicographically smallest member, so
    they are stable under merge order and across replays.
    """

    def __init__(self):
        self._parent: dict[str, str] = {}

    def add(self, mention_id: str) -> None:
        self._parent.setdefault(mention_id, mention_id)

    def __contains__(self, mention_id: str) -> bool:
        return mention_id in self._parent

    def find(self, mention_id: str) -> str:
        parent = self._parent
        root = mention_id
        while parent[root] != root:
            root = parent[root]
        while parent[mention_id] != root:
            parent[mention_id], mention_id = root, parent[mention_id]
        return root

    def merge(self, a: str, b: str) -> bool:
        """Union the clusters of a and b; returns False if already together."""
        self.add(a)
        self.add(b)
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        # smaller id becomes the root so cluster identity is deterministic
        if rb < ra:
            ra, rb = rb, ra
        self._parent[rb] = ra
        return True

    def together(self, a: str, b: str) -> bool:
        if a not in self._parent or b not in self._parent:
            return False
        return self.find(a) == self.find(b)

    def members(self, mention_id: str) -> frozenset[str]:
        if mention_id not in self._parent:
            return frozenset({mention_id})
        root = self.find(mention_id)
        return frozenset(m for m in self._parent if self.find(m) == root)

    def cluster_id(self, mention_id: str) -> str:
        root = self.find(mention_id) if mention_id in self._parent else mention_id
        return f"c|{root}"

    def partition(self) -> list[CoreferenceCluster]:
        groups: dict[str, set[str]] = {}
        for m in self._parent:
            groups.setdefault(self.find(m), set()).add(m)
        return [
            CoreferenceCluster(cluster_id=f"c|{root}", mention_ids=frozenset(ms))
            for root, ms in sorted(groups.items())
        ]

    def to_doc(self) -> dict[str, str]:
        return {m: self.find(m) for m in sorted(self._parent)}

    @classmethod
    def from_doc(cls, doc: dict[str, str]) -> "ClusterSet":
        cs = cls()
        for m, root in doc.items():
            cs.add(m)
            cs.add(root)
            cs.merge(m, root)
        return cs


@dataclass
class ValidationReport:
    """Counts plus invariant violations; violations are entries, not raises."""

    counts: dict[str, int] = field(default_factory=dict)
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_doc(self) -> dict:
        return {"counts": dict(self.counts), "violations": list(self.violations)}


def validate_corpus(state) -> ValidationReport:
    """Check every stored invariant and count documents, mentions and clusters.

    Cluster count excludes singletons. ``state`` is a CorpusState (engine
    module); only its read surface is used here.
    """
    report = ValidationReport()
    seen_docs: set[str] = set()
    for pair in state.document_pairs.values():
        for doc in (pair.news_doc, pair.sci_doc):
            if doc.doc_id in seen_docs:
                report.violations.append(f"duplicate doc_id {doc.doc_id!r}")
            seen_docs.add(doc.doc_id)

    for mention in state.mentions.values():
        doc = state.documents.get(mention.doc_id)
        if doc is None:
            report.violations.append(
                f"mention {mention.mention_id!r} references unknown document {mention.doc_id!r}"
            )
            continue
        text = doc.summary_text
        if not (0 <= mention.start_char < mention.end_char <= len(text)):
            report.violations.append(
                f"mention {mention.mention_id!r} span [{mention.start_char}, "
                f"{mention.end_char}) outside summary of length {len(text)}"
            )
            continue
        if text[mention.start_char : mention.end_char] != mention.surface:
            report.violations.append(
                f"mention {mention.mention_id!r} surface does not match its offsets"
            )

    clusters = state.clusters.partition()
    seen_mentions: set[str] = set()
    for cluster in clusters:
        for m in cluster.mention_ids:
            if m in seen_mentions:
                report.violations.append(
                    f"mention {m!r} appears in more than one cluster"
                )
            seen_mentions.add(m)
            if m not in state.mentions:
                report.violations.append(
                    f"cluster {cluster.cluster_id!r} references unknown mention {m!r}"
                )

    active_count = (
        state.active_mention_count()
        if hasattr(state, "active_mention_count")
        else len(state.mentions)
    )
    report.counts = {
        "document_pairs": len(state.document_pairs),
        "documents": len(seen_docs),
        "mentions": active_count,
        "candidate_pairs": len(state.pairs),
        "clusters": sum(1 for c in clusters if len(c.mention_ids) > 1),
        "singleton_clusters": sum(1 for c in clusters if len(c.mention_ids) == 1),
    }
    return report
