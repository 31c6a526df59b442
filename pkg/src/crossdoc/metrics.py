"""Coreference scoring (MUC, B-cubed), capability harness, histograms.

MUC (Vilain 1995) counts the links missing to reconcile one partition with
the other:

    recall = sum_K (|K| - partitions(K by system)) / sum_K (|K| - 1)

with precision the same formula with roles swapped. B-cubed (Bagga &
Baldwin 1998) averages per-mention cluster overlap instead:

    recall(m) = |sys(m) & gold(m)| / |gold(m)|
    precision(m) = |sys(m) & gold(m)| / |sys(m)|

Both are computed with exact rational arithmetic and converted to float at
the end. Singleton removal (on by default for B-cubed in the CLI) drops
mentions whose gold cluster has size 1 before scoring, to avoid score
inflation from trivially-correct singletons.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .errors import FormatError, UndefinedScoreError

Cluster = frozenset
Partition = Sequence[frozenset]

MUC = "muc"
B3 = "b3"

CAPABILITY_CATEGORIES = ("anaphora_exophora", "subset_relationship", "paraphrase")
EXPECTED_LABELS = ("coreferent", "not_coreferent")


@dataclass
class ScoreReport:
    metric: str
    precision: float
    recall: float
    f1: float
    counts: dict[str, int] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def to_doc(self) -> dict:
        return {
            "metric": self.metric,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "counts": dict(self.counts),
            "notes": list(self.notes),
        }


def _check_partition(clusters: Partition, name: str) -> set:
    seen: set = set()
    for cluster in clusters:
        if not cluster:
            raise ValueError(f"{name}: empty cluster")
        for m in cluster:
            if m in seen:
                raise ValueError(f"{name}: mention {m!r} appears in two clusters")
            seen.add(m)
    return seen


def _ratio(num: Fraction, den: Fraction, notes: list[str], what: str) -> Fraction:
    if den == 0:
        notes.append(f"{what} is 0/0, reported as 0")
        return Fraction(0)
    return num / den


def _f1(p: Fraction, r: Fraction, notes: list[str]) -> Fraction:
    if p + r == 0:
        notes.append("f1 is 0/0, reported as 0")
        return Fraction(0)
    return 2 * p * r / (p + r)


def _vilain_half(base: Partition, other: Partition) -> tuple[int, int]:
    """Numerator and denominator of the Vilain ratio taking ``base`` as key.

    partitions(K) counts the distinct ``other`` clusters intersecting K plus
    one block per mention of K absent from ``other``.
    """
    membership: dict = {}
    for idx, cluster in enumerate(other):
        for m in cluster:
            membership[m] = idx
    num = den = 0
    for cluster in base:
        blocks = {membership[m] for m in cluster if m in membership}
        unaligned = sum(1 for m in cluster if m not in membership)
        num += len(cluster) - (len(blocks) + unaligned)
        den += len(cluster) - 1
    return num, den


def muc_score(gold_clusters: Partition, system_clusters: Partition) -> ScoreReport:
    """Link-based MUC precision/recall/F1 of a system partition against gold."""
    gold = [frozenset(c) for c in gold_clusters]
    system = [frozenset(c) for c in system_clusters]
    _check_partition(gold, "gold")
    _check_partition(system, "system")

    notes: list[str] = []
    r_num, r_den = _vilain_half(gold, system)
    p_num, p_den = _vilain_half(system, gold)
    recall = _ratio(Fraction(r_num), Fraction(r_den), notes, "recall")
    precision = _ratio(Fraction(p_num), Fraction(p_den), notes, "precision")
    f1 = _f1(precision, recall, notes)
    return ScoreReport(
        metric=MUC,
        precision=float(precision),
        recall=float(recall),
        f1=float(f1),
        counts={
            "gold_clusters": len(gold),
            "system_clusters": len(system),
            "recall_links": r_den,
            "precision_links": p_den,
        },
        notes=notes,
    )


def b3_score(
    gold_clusters: Partition,
    system_clusters: Partition,
    remove_singletons: bool = False,
) -> ScoreReport:
    """Mention-based B-cubed score of a system partition against gold.

    Both partitions must cover the same mention universe. With
    ``remove_singletons`` the mentions whose gold cluster is a singleton are
    dropped and the system partition is restricted to the survivors (system
    clusters that become singletons are kept).
    """
    gold = [frozenset(c) for c in gold_clusters]
    system = [frozenset(c) for c in system_clusters]
    gold_universe = _check_partition(gold, "gold")
    system_universe = _check_partition(system, "system")
    if gold_universe != system_universe:
        raise ValueError("gold and system must partition the same mention universe")

    removed = 0
    if remove_singletons:
        keep = {m for c in gold if len(c) > 1 for m in c}
        removed = len(gold_universe) - len(keep)
        gold = [c for c in gold if len(c) > 1]
        system = [frozenset(c & keep) for c in system]
        system = [c for c in system if c]
        gold_universe = keep
    if not gold_universe:
        raise UndefinedScoreError("no mentions left to score after singleton removal")

    gold_of = {m: c for c in gold for m in c}
    sys_of = {m: c for c in system for m in c}
    notes: list[str] = []
    n = len(gold_universe)
    recall = sum(
        Fraction(len(sys_of[m] & gold_of[m]), len(gold_of[m])) for m in gold_universe
    ) / n
    precision = sum(
        Fraction(len(sys_of[m] & gold_of[m]), len(sys_of[m])) for m in gold_universe
    ) / n
    f1 = _f1(precision, recall, notes)
    return ScoreReport(
        metric=B3,
        precision=float(precision),
        recall=float(recall),
        f1=float(f1),
        counts={
            "mentions_scored": n,
            "mentions_removed": removed,
            "gold_clusters": len(gold),
            "system_clusters": len(system),
        },
        notes=notes,
    )


# ---------------------------------------------------------------------------
# capability tests


@dataclass(frozen=True)
class CapabilityCase:
    category: str
    expected: str
    mention_id_a: str
    mention_id_b: str
    predicted: Optional[str] = None

    def __post_init__(self):
        if self.category not in CAPABILITY_CATEGORIES:
            raise ValueError(f"unknown capability category {self.category!r}")
        if self.expected not in EXPECTED_LABELS:
            raise ValueError(f"expected must be one of {EXPECTED_LABELS}")


@dataclass
class CapabilityCell:
    category: str
    expected: str
    passes: int
    total: int

    @property
    def pass_rate(self) -> float:
        return self.passes / self.total if self.total else 0.0

    def formatted(self) -> str:
        return f"{self.pass_rate:.1%} ({self.passes}/{self.total})"


def capability_report(
    cases: Sequence[CapabilityCase],
    predictions: Optional[dict[tuple[str, str], str]] = None,
) -> list[CapabilityCell]:
    """Pass counts per (category, expected) cell.

    A case passes when the predicted relation equals the expected one; the
    per-cell pass rate over expected-coreferent cases is the recall on that
    slice. Predictions come from ``case.predicted`` or the ``predictions``
    mapping keyed by the unordered mention-id pair.
    """
    predictions = predictions or {}
    cells: dict[tuple[str, str], list[int]] = {}
    for case in cases:
        predicted = case.predicted
        if predicted is None:
            key = tuple(sorted((case.mention_id_a, case.mention_id_b)))
            predicted = predictions.get(key)
        if predicted is None:
            raise ValueError(
                f"missing prediction for case {case.mention_id_a!r}/{case.mention_id_b!r}"
            )
        if predicted not in EXPECTED_LABELS:
            raise ValueError(f"prediction must be one of {EXPECTED_LABELS}")
        cell = cells.setdefault((case.category, case.expected), [0, 0])
        cell[1] += 1
        if predicted == case.expected:
            cell[0] += 1
    return [
        CapabilityCell(category=cat, expected=exp, passes=p, total=t)
        for (cat, exp), (p, t) in sorted(cells.items())
    ]


# ---------------------------------------------------------------------------
# similarity distributions


def similarity_histogram(
    pairs: Iterable[tuple[float, bool]], bin_width: float = 0.05
) -> list[tuple[float, int, int]]:
    """(bin_start, yes_count, no_count) rows over half-open bins of [-1, 1].

    Bin assignment is floor-based; the top edge 1.0 falls into the last bin
    so counts are conserved.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    nbins = math.ceil(round(2.0 / bin_width, 9))
    yes = [0] * nbins
    no = [0] * nbins
    for sim, label in pairs:
        if not -1.0 <= sim <= 1.0:
            raise ValueError(f"similarity {sim} outside [-1, 1]")
        # snap near-boundary quotients so 0.65 lands in the [0.65, 0.70) bin
        idx = min(int(math.floor(round((sim + 1.0) / bin_width, 9))), nbins - 1)
        if label:
            yes[idx] += 1
        else:
            no[idx] += 1
    return [
        (round(-1.0 + i * bin_width, 9), yes[i], no[i]) for i in range(nbins)
    ]


# ---------------------------------------------------------------------------
# cluster files
#
# One line per mention: {doc_id, start_char, end_char, cluster_id}. This is
# both the corpus export format and the scorer input, so exports round-trip.


def read_cluster_file(path) -> list[frozenset]:
    """Clusters of (doc_id, start_char, end_char) mention identities."""
    groups: dict[str, set] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                mention = (str(row["doc_id"]), int(row["start_char"]), int(row["end_char"]))
                cid = str(row["cluster_id"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"{path} line {lineno}: {exc}") from exc
            groups.setdefault(cid, set()).add(mention)
    return [frozenset(ms) for _, ms in sorted(groups.items())]


def write_cluster_file(fh, clusters: Iterable[tuple[str, Iterable[tuple[str, int, int]]]]) -> None:
    """Write (cluster_id, mentions) groups in the cluster-file format."""
    for cluster_id, mentions in clusters:
        for doc_id, start, end in sorted(mentions):
            fh.write(
                json.dumps(
                    {
                        "doc_id": doc_id,
                        "start_char": start,
                        "end_char": end,
                        "cluster_id": cluster_id,
                    }
                )
                + "\n"
            )
