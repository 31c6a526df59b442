"""Similarity-threshold baseline and score-matrix clustering.

The threshold baseline marks a pair coreferent when its cosine similarity
reaches a cutoff t (boundary inclusive) and materializes every link implied
by transitivity. Externally produced pairwise scores are clustered with
greedy agglomeration instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import ConflictError, FormatError, InsufficientDataError
from .ingest import iter_jsonl
from .model import CandidatePair, ClusterSet, PairKey

SYMMETRY_TOLERANCE = 1e-6


@dataclass
class ScoreMatrix:
    """Symmetric pairwise coreference scores over an ordered mention list.

    Missing pairs hold -inf so they can never drive a merge; the diagonal is
    ignored.
    """

    mention_ids: tuple[str, ...]
    matrix: np.ndarray
    source_tag: str = ""

    def __post_init__(self):
        n = len(self.mention_ids)
        if self.matrix.shape != (n, n):
            raise FormatError(
                f"matrix shape {self.matrix.shape} does not fit {n} mentions"
            )
        if np.isnan(self.matrix).any() or np.isposinf(self.matrix).any():
            raise FormatError("matrix entries must be finite or -inf")
        off = ~np.eye(n, dtype=bool)
        a, b = self.matrix, self.matrix.T
        neg_a, neg_b = np.isneginf(a), np.isneginf(b)
        finite_diff = np.abs(np.where(neg_a | neg_b, 0.0, a) - np.where(neg_a | neg_b, 0.0, b))
        close = (neg_a == neg_b) & (finite_diff <= SYMMETRY_TOLERANCE)
        if not close[off].all():
            raise FormatError(f"matrix asymmetric beyond {SYMMETRY_TOLERANCE}")


def threshold_classify(
    pairs: Sequence[CandidatePair], t: float
) -> dict[PairKey, int]:
    """1 for pairs with similarity >= t, else 0; unscored pairs are 0."""
    if not np.isfinite(t):
        raise ValueError("threshold must be finite")
    return {
        p.pair_key: (1 if p.similarity is not None and p.similarity >= t else 0)
        for p in pairs
    }


def transitive_inference(
    positive_pairs: Iterable[tuple[str, str]],
    mentions: Optional[Iterable[str]] = None,
) -> list[frozenset[str]]:
    """Connected components of the positive-pair graph.

    Every link implied by a chain of positives is materialized: if (A,B) and
    (B,C) are positive then A, B, C share a cluster. ``mentions`` adds
    isolated ids as singletons.
    """
    clusters = ClusterSet()
    for m in mentions or ():
        clusters.add(m)
    for a, b in positive_pairs:
        clusters.merge(a, b)
    return [c.mention_ids for c in clusters.partition()]


def sweep_threshold(
    dev_pairs: Sequence[tuple[Optional[float], bool]],
    t_min: float = 0.30,
    t_max: float = 0.80,
    step: float = 0.01,
) -> tuple[float, list[tuple[float, float]]]:
    """Grid search of the cutoff on (similarity, gold) development pairs.

    Evaluates pairwise accuracy at every threshold from t_min to t_max
    inclusive (51 values at the defaults) and returns the lowest threshold
    attaining the best accuracy plus the full accuracy curve.
    """
    if not dev_pairs:
        raise InsufficientDataError("empty development set")
    count = int(round((t_max - t_min) / step)) + 1
    thresholds = np.round(t_min + step * np.arange(count), 10)
    sims = np.array(
        [(-np.inf if s is None else float(s)) for s, _ in dev_pairs], dtype=np.float64
    )
    gold = np.array([1 if g else 0 for _, g in dev_pairs], dtype=np.int64)
    accuracies = _kernels.sweep_accuracy(sims, gold, thresholds)
    curve = [(float(t), float(a)) for t, a in zip(thresholds, accuracies)]
    best_t, _ = max(curve, key=lambda ta: (ta[1], -ta[0]))
    return best_t, curve


def agglomerative_cluster(
    matrix: ScoreMatrix, stop_threshold: float, linkage: str = "average"
) -> list[frozenset[str]]:
    """Bottom-up clustering of a score matrix.

    Starts from singletons and repeatedly merges the cluster pair with the
    highest linkage score while that score >= stop_threshold. Ties break on
    the lexicographically smallest (cluster id, cluster id) pair, where a
    cluster is identified by its smallest mention id, so results do not
    depend on input order.
    """
    if linkage not in _kernels.LINKAGE_CODES:
        raise ValueError(f"unknown linkage {linkage!r}")
    n = len(matrix.mention_ids)
    if n == 0:
        return []
    # rank = position in the lexicographic order of mention ids
    order = sorted(range(n), key=lambda i: matrix.mention_ids[i])
    ranks = np.empty(n, dtype=np.int64)
    for rank, idx in enumerate(order):
        ranks[idx] = rank
    labels = _kernels.agglomerate(
        matrix.matrix, stop_threshold, ranks, _kernels.LINKAGE_CODES[linkage]
    )
    groups: dict[int, set[str]] = {}
    for i, label in enumerate(labels.tolist()):
        groups.setdefault(label, set()).add(matrix.mention_ids[i])
    return [frozenset(g) for _, g in sorted(groups.items(), key=lambda kv: min(kv[1]))]


def load_external_scores(
    path, known_mentions: Optional[set[str]] = None, source_tag: Optional[str] = None
) -> tuple[ScoreMatrix, list[str]]:
    """Assemble a ScoreMatrix from a pair-per-line score file.

    Lines are ``{mention_id_a, mention_id_b, score}``. Records naming
    mentions outside ``known_mentions`` are skipped and reported; a pair
    listed twice with different scores is a hard conflict. Unlisted pairs
    default to -inf.
    """
    errors: list[str] = []
    scores: dict[tuple[str, str], float] = {}
    ids: set[str] = set()
    for lineno, record in iter_jsonl(path):
        if isinstance(record, FormatError):
            errors.append(f"line {lineno}: {record}")
            continue
        try:
            a, b = str(record["mention_id_a"]), str(record["mention_id_b"])
            score = float(record["score"])
        except (KeyError, TypeError, ValueError) as exc:
            errors.append(f"line {lineno}: malformed record ({exc})")
            continue
        if not np.isfinite(score):
            errors.append(f"line {lineno}: non-finite score")
            continue
        if a == b:
            errors.append(f"line {lineno}: self-pair {a!r}")
            continue
        unknown = [m for m in (a, b) if known_mentions is not None and m not in known_mentions]
        if unknown:
            errors.append(f"line {lineno}: unknown mention ids {unknown}")
            continue
        key = (a, b) if a <= b else (b, a)
        if key in scores and scores[key] != score:
            raise ConflictError(
                f"{path} line {lineno}: contradictory scores for {key}: "
                f"{scores[key]} vs {score}"
            )
        scores[key] = score
        ids.update(key)

    mention_ids = tuple(sorted(ids))
    index = {m: i for i, m in enumerate(mention_ids)}
    n = len(mention_ids)
    matrix = np.full((n, n), -np.inf, dtype=np.float64)
    np.fill_diagonal(matrix, 0.0)
    for (a, b), score in scores.items():
        i, j = index[a], index[b]
        matrix[i, j] = matrix[j, i] = score
    return (
        ScoreMatrix(
            mention_ids=mention_ids,
            matrix=matrix,
            source_tag=source_tag or str(path),
        ),
        errors,
    )


def write_clusters_jsonl(clusters: Sequence[frozenset[str]], fh) -> None:
    """One ``{mention_id, cluster_id}`` line per mention, cluster id = min member."""
    rows = []
    for cluster in clusters:
        cid = f"c|{min(cluster)}"
        rows.extend({"mention_id": m, "cluster_id": cid} for m in sorted(cluster))
    for row in sorted(rows, key=lambda r: r["mention_id"]):
        fh.write(json.dumps(row) + "\n")
