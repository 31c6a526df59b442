"""Loading document pairs, mentions and token embeddings; metadata matching.

File formats (all UTF-8, one JSON object per line):

* document pairs: ``{pair_id, news:{doc_id,title,summary_text,full_text?,
  authors[],published?,url?}, science:{doc_id,title,summary_text,doi?,
  authors[],published?}}`` plus an optional ``split`` label.
* mentions: ``{doc_id, start_char, end_char}`` — surface text is always
  re-derived from the stored summary, never trusted from input.
* embeddings: a header line ``{pair_id, dim, encoder_tag, token_counts}``
  followed by one line per token ``{doc_id, start_char, end_char, vector}``;
  vectors are read as 32-bit floats.
"""

from __future__ import annotations

import hashlib
import json
import re
import unicodedata
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from typing import Optional

import numpy as np

from .errors import FormatError, InsufficientMetadataError
from .model import Document, DocumentPair, NEWS, SCIENCE

_TOKEN_RE = re.compile(r"\S+")


def tokenize(text: str) -> list[tuple[int, int]]:
    """Whitespace token character ranges over ``text``."""
    return [m.span() for m in _TOKEN_RE.finditer(text)]


@dataclass
class EmbeddingTable:
    """Per-document token spans and their vectors for one document pair.

    Token order follows the source file (news summary tokens then science
    abstract tokens for the concatenated encoders this ingests); provenance
    is kept per document so mention token spans index into their own
    document's token list.
    """

    pair_id: str
    dim: int
    encoder_tag: str
    tokens: dict[str, list[tuple[int, int]]]
    vectors: dict[str, np.ndarray]

    def doc_tokens(self, doc_id: str) -> list[tuple[int, int]]:
        return self.tokens.get(doc_id, [])

    def to_doc(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "dim": self.dim,
            "encoder_tag": self.encoder_tag,
            "tokens": {d: [list(t) for t in ts] for d, ts in self.tokens.items()},
            "vectors": {d: [[float(x) for x in row] for row in v] for d, v in self.vectors.items()},
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "EmbeddingTable":
        return cls(
            pair_id=doc["pair_id"],
            dim=int(doc["dim"]),
            encoder_tag=doc["encoder_tag"],
            tokens={d: [tuple(t) for t in ts] for d, ts in doc["tokens"].items()},
            vectors={
                d: np.asarray(v, dtype=np.float32).reshape(-1, int(doc["dim"]))
                for d, v in doc["vectors"].items()
            },
        )


@dataclass(frozen=True)
class MatchScore:
    doi_exact: bool
    author_overlap: float
    date_gap_days: Optional[int] = None


@dataclass
class IngestReport:
    """Outcome of a file ingest: how many records landed, what was skipped."""

    new: int = 0
    duplicates: int = 0
    errors: list[str] = field(default_factory=list)

    def error(self, lineno: int, message: str) -> None:
        self.errors.append(f"line {lineno}: {message}")

    @property
    def ok(self) -> bool:
        return not self.errors


# ---------------------------------------------------------------------------
# author-name matching


def normalize_name(name: str) -> list[str]:
    """Lowercased, diacritic- and punctuation-stripped name tokens."""
    decomposed = unicodedata.normalize("NFKD", name.lower())
    stripped = "".join(c for c in decomposed if not unicodedata.combining(c))
    cleaned = "".join(c if c.isalnum() else " " for c in stripped)
    return cleaned.split()


def names_match(a: str, b: str) -> bool:
    """Approximate person-name equality.

    Last tokens must be equal, and first tokens must be equal or one must be
    the initial of the other ("J. Smith" matches "John Smith").
    """
    ta, tb = normalize_name(a), normalize_name(b)
    if not ta or not tb:
        return False
    if ta[-1] != tb[-1]:
        return False
    fa, fb = ta[0], tb[0]
    if fa == fb:
        return True
    return (len(fa) == 1 and fb.startswith(fa)) or (len(fb) == 1 and fa.startswith(fb))


def author_overlap(authors_a: list[str], authors_b: list[str]) -> float:
    """|maximum matching between the two author lists| / min(|a|, |b|)."""
    if not authors_a or not authors_b:
        return 0.0
    edges = [
        [j for j, b in enumerate(authors_b) if names_match(a, b)] for a in authors_a
    ]
    matched_b: dict[int, int] = {}

    def try_assign(i: int, seen: set[int]) -> bool:
        for j in edges[i]:
            if j in seen:
                continue
            seen.add(j)
            if j not in matched_b or try_assign(matched_b[j], seen):
                matched_b[j] = i
                return True
        return False

    matches = sum(1 for i in range(len(authors_a)) if try_assign(i, set()))
    return matches / min(len(authors_a), len(authors_b))


def match_documents(
    news_meta: Document,
    sci_meta: Document,
    date_window_days: int = 14,
    author_threshold: float = 0.5,
) -> tuple[bool, MatchScore]:
    """Decide whether a news article and a paper describe the same work.

    Matches on exact DOI when both sides carry one, otherwise on author
    overlap >= ``author_threshold`` with publication dates within
    ``date_window_days``.
    """
    has_doi = bool(news_meta.doi and sci_meta.doi)
    has_authors = bool(news_meta.authors and sci_meta.authors)
    if not has_doi and not has_authors:
        raise InsufficientMetadataError(
            "need a DOI on both sides or author lists to match documents"
        )

    doi_exact = has_doi and news_meta.doi.strip().lower() == sci_meta.doi.strip().lower()
    overlap = author_overlap(list(news_meta.authors), list(sci_meta.authors))
    gap = None
    if news_meta.published and sci_meta.published:
        gap = abs((news_meta.published - sci_meta.published).days)

    matched = doi_exact or (
        overlap >= author_threshold and gap is not None and gap <= date_window_days
    )
    return matched, MatchScore(doi_exact=doi_exact, author_overlap=overlap, date_gap_days=gap)


# ---------------------------------------------------------------------------
# document-pair records


def _parse_date(value) -> Optional[date]:
    if value in (None, ""):
        return None
    return date.fromisoformat(str(value))


def parse_document_record(doc: dict, kind: str) -> Document:
    for key in ("doc_id", "title", "summary_text"):
        if key not in doc:
            raise FormatError(f"{kind} document missing {key!r}")
    if not doc["summary_text"]:
        raise FormatError(f"{kind} document {doc['doc_id']!r} has empty summary_text")
    return Document(
        doc_id=str(doc["doc_id"]),
        kind=kind,
        title=str(doc["title"]),
        summary_text=str(doc["summary_text"]),
        full_text=doc.get("full_text"),
        doi=doc.get("doi"),
        authors=tuple(str(a) for a in doc.get("authors", [])),
        published=_parse_date(doc.get("published")),
        url=doc.get("url"),
    )


def parse_pair_record(record: dict, created_at: Optional[datetime] = None) -> DocumentPair:
    if "pair_id" not in record:
        raise FormatError("record missing 'pair_id'")
    for side in ("news", "science"):
        if side not in record or not isinstance(record[side], dict):
            raise FormatError(f"record {record.get('pair_id')!r} missing {side!r} document")
    return DocumentPair(
        pair_id=str(record["pair_id"]),
        news_doc=parse_document_record(record["news"], NEWS),
        sci_doc=parse_document_record(record["science"], SCIENCE),
        created_at=created_at or datetime.now(timezone.utc),
        split=record.get("split"),
    )


def iter_jsonl(path):
    """Yield (lineno, parsed-or-FormatError) for every non-blank line."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                yield lineno, FormatError(f"invalid JSON: {exc}")


# ---------------------------------------------------------------------------
# embeddings


def load_embedding_file(path, documents: dict[str, Document]) -> EmbeddingTable:
    """Parse and validate an embedding file against the stored documents."""
    rows = iter_jsonl(path)
    try:
        _, header = next(rows)
    except StopIteration:
        raise FormatError(f"{path}: empty embedding file") from None
    if isinstance(header, FormatError):
        raise header
    for key in ("pair_id", "dim", "encoder_tag", "token_counts"):
        if key not in header:
            raise FormatError(f"{path}: header missing {key!r}")
    dim = int(header["dim"])
    if dim < 1:
        raise FormatError(f"{path}: dim must be positive")
    token_counts = {str(k): int(v) for k, v in header["token_counts"].items()}

    tokens: dict[str, list[tuple[int, int]]] = {d: [] for d in token_counts}
    vec_rows: dict[str, list[np.ndarray]] = {d: [] for d in token_counts}
    for lineno, row in rows:
        if isinstance(row, FormatError):
            raise FormatError(f"{path} line {lineno}: {row}")
        doc_id = str(row.get("doc_id"))
        if doc_id not in token_counts:
            raise FormatError(f"{path} line {lineno}: doc_id {doc_id!r} not in header")
        doc = documents.get(doc_id)
        if doc is None:
            raise FormatError(f"{path} line {lineno}: unknown document {doc_id!r}")
        start, end = int(row["start_char"]), int(row["end_char"])
        if not (0 <= start < end <= len(doc.summary_text)):
            raise FormatError(
                f"{path} line {lineno}: token span [{start}, {end}) outside summary"
            )
        vector = np.asarray(row["vector"], dtype=np.float32)
        if vector.ndim != 1 or vector.shape[0] != dim:
            raise FormatError(
                f"{path} line {lineno}: expected {dim} values, got {vector.shape}"
            )
        if not np.isfinite(vector).all():
            raise FormatError(f"{path} line {lineno}: non-finite vector rejected")
        tokens[doc_id].append((start, end))
        vec_rows[doc_id].append(vector)

    for doc_id, expected in token_counts.items():
        if len(tokens[doc_id]) != expected:
            raise FormatError(
                f"{path}: header promised {expected} tokens for {doc_id!r}, "
                f"got {len(tokens[doc_id])}"
            )

    return EmbeddingTable(
        pair_id=str(header["pair_id"]),
        dim=dim,
        encoder_tag=str(header["encoder_tag"]),
        tokens=tokens,
        vectors={
            d: (np.vstack(rs) if rs else np.zeros((0, dim), dtype=np.float32))
            for d, rs in vec_rows.items()
        },
    )


def write_embedding_file(path, table: EmbeddingTable) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "pair_id": table.pair_id,
            "dim": table.dim,
            "encoder_tag": table.encoder_tag,
            "token_counts": {d: len(ts) for d, ts in table.tokens.items()},
        }
        fh.write(json.dumps(header) + "\n")
        for doc_id, spans in table.tokens.items():
            vectors = table.vectors[doc_id]
            for (start, end), row in zip(spans, vectors):
                fh.write(
                    json.dumps(
                        {
                            "doc_id": doc_id,
                            "start_char": start,
                            "end_char": end,
                            "vector": [float(x) for x in row],
                        }
                    )
                    + "\n"
                )


def _token_vector(surface: str, d: int, seed: int) -> np.ndarray:
    digest = hashlib.blake2b(
        f"{seed}\x1f{surface.lower()}".encode("utf-8"), digest_size=8
    ).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "big"))
    vec = rng.standard_normal(d)
    return (vec / np.linalg.norm(vec)).astype(np.float32)


def stub_embed(pair: DocumentPair, d: int = 32, seed: int = 0) -> EmbeddingTable:
    """Deterministic test encoder: whitespace tokens, hashed unit vectors.

    Identical (lowercased) surfaces always get identical vectors for a given
    seed, so planted-cluster corpora have exactly similarity 1.0 inside a
    cluster. No trained encoder is involved anywhere in the workbench.
    """
    if d < 2:
        raise ValueError("embedding dimension must be >= 2")
    tokens: dict[str, list[tuple[int, int]]] = {}
    vectors: dict[str, np.ndarray] = {}
    for doc in (pair.news_doc, pair.sci_doc):
        spans = tokenize(doc.summary_text)
        tokens[doc.doc_id] = spans
        if spans:
            vectors[doc.doc_id] = np.vstack(
                [_token_vector(doc.summary_text[s:e], d, seed) for s, e in spans]
            )
        else:
            vectors[doc.doc_id] = np.zeros((0, d), dtype=np.float32)
    return EmbeddingTable(
        pair_id=pair.pair_id,
        dim=d,
        encoder_tag=f"stub:d={d}:seed={seed}",
        tokens=tokens,
        vectors=vectors,
    )
