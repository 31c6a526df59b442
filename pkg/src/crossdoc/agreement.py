"""Inter-annotator agreement: Cohen's kappa, Fleiss' kappa, band labels.

Both statistics share the chance-corrected form

    kappa = (p_o - p_e) / (1 - p_e)

Cohen's p_e uses the product of the two annotators' own label marginals;
Fleiss' p_e pools label proportions across all raters (Fleiss 1971).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional, Sequence

from .errors import InsufficientDataError, UndefinedScoreError
from .model import VERDICT_NO, VERDICT_YES

LABELS = (VERDICT_YES, VERDICT_NO)

# Landis & Koch interpretation bands, upper bounds inclusive.
_BANDS = (
    (0.0, "poor agreement"),
    (0.20, "slight agreement"),
    (0.40, "fair agreement"),
    (0.60, "moderate agreement"),
    (0.80, "substantial agreement"),
    (1.0, "almost perfect agreement"),
)


def cohen_kappa(verdicts_a: Sequence[str], verdicts_b: Sequence[str]) -> float:
    """Pairwise chance-corrected agreement between two annotators.

    Inputs are aligned yes/no verdict lists over the pairs both annotators
    answered. When chance agreement is 1 (both annotators constant and
    identical) the statistic is 0/0; perfect observed agreement is reported
    as 1.0, anything else is an error.
    """
    if len(verdicts_a) != len(verdicts_b):
        raise InsufficientDataError("verdict lists must be aligned")
    n = len(verdicts_a)
    if n == 0:
        raise InsufficientDataError("no overlapping verdicts to compare")
    for v in (*verdicts_a, *verdicts_b):
        if v not in LABELS:
            raise ValueError(f"verdict must be yes or no, got {v!r}")

    p_o = sum(a == b for a, b in zip(verdicts_a, verdicts_b)) / n
    count_a, count_b = Counter(verdicts_a), Counter(verdicts_b)
    p_e = sum((count_a[l] / n) * (count_b[l] / n) for l in LABELS)
    if p_e == 1.0:
        if p_o == 1.0:
            return 1.0
        raise UndefinedScoreError("chance agreement is 1; kappa undefined")
    return (p_o - p_e) / (1.0 - p_e)


def fleiss_kappa(items: Sequence[Sequence[int]]) -> float:
    """Fleiss' kappa over per-item (yes, no) rating counts.

    Every item must be rated by the same number of raters n >= 2; items not
    rated by all annotators are excluded before calling this.
    """
    if not items:
        raise InsufficientDataError("no items")
    counts = [tuple(int(c) for c in row) for row in items]
    if any(len(row) != 2 for row in counts):
        raise ValueError("each item needs exactly (yes, no) counts")
    if any(c < 0 for row in counts for c in row):
        raise ValueError("negative rating count")
    n = sum(counts[0])
    if n < 2:
        raise InsufficientDataError("need at least 2 raters per item")
    if any(sum(row) != n for row in counts):
        raise ValueError("ragged rater counts: every item must have the same n")

    big_n = len(counts)
    p_bar = sum(
        (sum(c * c for c in row) - n) / (n * (n - 1)) for row in counts
    ) / big_n
    totals = [sum(row[j] for row in counts) for j in range(2)]
    p_e = sum((t / (big_n * n)) ** 2 for t in totals)
    if p_e == 1.0:
        if p_bar == 1.0:
            return 1.0
        raise UndefinedScoreError("chance agreement is 1; kappa undefined")
    return (p_bar - p_e) / (1.0 - p_e)


def interpret_kappa(value: float) -> str:
    """Landis & Koch band label for a kappa in [-1, 1]."""
    if not -1.0 <= value <= 1.0:
        raise ValueError(f"kappa must lie in [-1, 1], got {value}")
    if value < 0.0:
        return _BANDS[0][1]
    for upper, label in _BANDS[1:]:
        if value <= upper:
            return label
    return _BANDS[-1][1]


@dataclass
class PairwiseAgreement:
    annotator_a: str
    annotator_b: str
    overlap: int
    kappa: Optional[float]
    band: Optional[str]
    note: Optional[str] = None


@dataclass
class FleissAgreement:
    items: int
    raters: int
    kappa: Optional[float]
    band: Optional[str]
    note: Optional[str] = None


@dataclass
class AgreementReport:
    pairwise: list[PairwiseAgreement] = field(default_factory=list)
    fleiss: Optional[FleissAgreement] = None
    difficult_fleiss: Optional[FleissAgreement] = None
    annotation_counts: dict[str, int] = field(default_factory=dict)

    def to_doc(self) -> dict:
        return {
            "annotation_counts": dict(self.annotation_counts),
            "pairwise": [
                {
                    "annotators": [p.annotator_a, p.annotator_b],
                    "overlap": p.overlap,
                    "kappa": p.kappa,
                    "band": p.band,
                    "note": p.note,
                }
                for p in self.pairwise
            ],
            "fleiss": _fleiss_doc(self.fleiss),
            "difficult_fleiss": _fleiss_doc(self.difficult_fleiss),
        }


def _fleiss_doc(f: Optional[FleissAgreement]) -> Optional[dict]:
    if f is None:
        return None
    return {"items": f.items, "raters": f.raters, "kappa": f.kappa, "band": f.band, "note": f.note}


def _safe_cohen(a: list[str], b: list[str]) -> tuple[Optional[float], Optional[str], Optional[str]]:
    try:
        k = cohen_kappa(a, b)
        return k, interpret_kappa(k), None
    except UndefinedScoreError as exc:
        return None, None, str(exc)


def _safe_fleiss(rows: list[tuple[int, int]], raters: int) -> FleissAgreement:
    if not rows:
        return FleissAgreement(items=0, raters=raters, kappa=None, band=None, note="no common items")
    try:
        k = fleiss_kappa(rows)
        return FleissAgreement(items=len(rows), raters=raters, kappa=k, band=interpret_kappa(k))
    except UndefinedScoreError as exc:
        return FleissAgreement(items=len(rows), raters=raters, kappa=None, band=None, note=str(exc))


def build_report(
    verdicts: dict[tuple[str, str], str],
    difficult_flags: dict[object, set[str]] | None = None,
) -> AgreementReport:
    """Agreement analysis over effective verdicts.

    ``verdicts`` maps (annotator_id, pair_key) to the annotator's latest
    yes/no verdict. Pairwise kappas run over each annotator pair's common
    pairs; the Fleiss statistic runs over pairs answered by every annotator,
    and again over the subset flagged difficult by at least one annotator.
    """
    difficult_flags = difficult_flags or {}
    by_annotator: dict[str, dict[object, str]] = {}
    for (annotator, key), verdict in verdicts.items():
        by_annotator.setdefault(annotator, {})[key] = verdict

    report = AgreementReport(
        annotation_counts={a: len(vs) for a, vs in sorted(by_annotator.items())}
    )
    annotators = sorted(by_annotator)

    for a, b in combinations(annotators, 2):
        common = sorted(by_annotator[a].keys() & by_annotator[b].keys())
        if not common:
            report.pairwise.append(
                PairwiseAgreement(a, b, 0, None, None, note="no overlapping pairs")
            )
            continue
        va = [by_annotator[a][k] for k in common]
        vb = [by_annotator[b][k] for k in common]
        kappa, band, note = _safe_cohen(va, vb)
        report.pairwise.append(PairwiseAgreement(a, b, len(common), kappa, band, note))

    if len(annotators) >= 2:
        common_all = sorted(set.intersection(*(set(by_annotator[a]) for a in annotators)))
        rows = []
        difficult_rows = []
        for key in common_all:
            yes = sum(1 for a in annotators if by_annotator[a][key] == VERDICT_YES)
            row = (yes, len(annotators) - yes)
            rows.append(row)
            if difficult_flags.get(key):
                difficult_rows.append(row)
        report.fleiss = _safe_fleiss(rows, len(annotators))
        report.difficult_fleiss = _safe_fleiss(difficult_rows, len(annotators))
    return report
