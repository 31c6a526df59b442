from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from crossdoc.errors import CrossDocumentError, SpanError
from crossdoc.model import (
    ClusterSet,
    Mention,
    key_of_ids,
    make_mention,
    mention_id_for,
    pair_key,
    resolve_token_span,
    span_overlap,
    validate_corpus,
)

from conftest import make_doc, make_engine, make_pair


def mention(doc_id: str, start: int, end: int) -> Mention:
    return Mention(
        mention_id=mention_id_for(doc_id, start, end),
        doc_id=doc_id,
        start_char=start,
        end_char=end,
        surface="x" * (end - start),
    )


class TestSpanOverlap:
    def test_touching_ranges_do_not_overlap(self):
        assert span_overlap((0, 5), (5, 9)) is False

    def test_proper_overlap(self):
        assert span_overlap((0, 5), (3, 9)) is True

    def test_identical_ranges_overlap(self):
        assert span_overlap((2, 4), (2, 4)) is True

    def test_invalid_range_rejected(self):
        with pytest.raises(SpanError):
            span_overlap((5, 5), (0, 3))
        with pytest.raises(SpanError):
            span_overlap((0, 3), (7, 2))


class TestPairKey:
    def test_symmetry(self):
        a = mention("d-news", 0, 5)
        b = mention("d-sci", 3, 9)
        assert pair_key(a, b) == pair_key(b, a)

    def test_distinct_pairs_get_distinct_keys(self):
        a = mention("d-news", 0, 5)
        b = mention("d-sci", 3, 9)
        c = mention("d-sci", 4, 12)
        assert pair_key(a, b) != pair_key(a, c)

    def test_same_document_rejected(self):
        a = mention("d-news", 0, 5)
        b = mention("d-news", 6, 9)
        with pytest.raises(CrossDocumentError):
            pair_key(a, b)

    @given(
        st.text(min_size=1, max_size=10),
        st.text(min_size=1, max_size=10),
    )
    def test_key_of_ids_symmetric(self, id_a, id_b):
        assert key_of_ids(id_a, id_b) == key_of_ids(id_b, id_a)
        assert tuple(sorted((id_a, id_b))) == key_of_ids(id_a, id_b)


class TestMentions:
    def test_surface_derived_from_text(self):
        doc = make_doc("n1", "news", "blood from donors")
        m = make_mention(doc, 0, 5)
        assert m.surface == "blood"

    def test_span_must_fit_text(self):
        doc = make_doc("n1", "news", "short")
        with pytest.raises(SpanError):
            make_mention(doc, 2, 99)

    def test_token_span_covers_partial_overlaps(self):
        # tokens: [0,5) [6,10); mention [3,8) overlaps both
        spans = resolve_token_span(3, 8, [(0, 5), (6, 10)])
        assert spans == (0, 1)

    def test_token_span_none_when_no_token_overlaps(self):
        assert resolve_token_span(5, 6, [(0, 5), (6, 10)]) is None


class TestClusterSet:
    def test_merge_is_idempotent(self):
        cs = ClusterSet()
        assert cs.merge("a", "b") is True
        assert cs.merge("a", "b") is False
        assert cs.together("a", "b")

    def test_partition_is_disjoint(self):
        cs = ClusterSet()
        cs.merge("a", "b")
        cs.merge("c", "d")
        cs.merge("b", "c")
        cs.merge("x", "y")
        partition = cs.partition()
        seen = set()
        for cluster in partition:
            assert not (cluster.mention_ids & seen)
            seen |= cluster.mention_ids
        assert seen == {"a", "b", "c", "d", "x", "y"}

    def test_cluster_id_stable_under_merge_order(self):
        left = ClusterSet()
        left.merge("m2", "m3")
        left.merge("m1", "m2")
        right = ClusterSet()
        right.merge("m1", "m3")
        right.merge("m2", "m1")
        assert left.cluster_id("m3") == right.cluster_id("m3") == "c|m1"

    def test_roundtrip_doc(self):
        cs = ClusterSet()
        cs.merge("a", "b")
        cs.merge("c", "d")
        again = ClusterSet.from_doc(cs.to_doc())
        assert {c.mention_ids for c in again.partition()} == {
            c.mention_ids for c in cs.partition()
        }


class TestValidateCorpus:
    def test_empty_store(self):
        engine = make_engine()
        report = validate_corpus(engine.state)
        assert report.ok
        assert report.counts["documents"] == 0
        assert report.counts["mentions"] == 0
        assert report.counts["clusters"] == 0

    def test_counts_and_singleton_exclusion(self):
        engine = make_engine(iaa_fraction=0.0)
        engine.ingest_pair(make_pair())
        engine.add_mention("p1-news", 0, 5)
        engine.add_mention("p1-news", 6, 10)
        engine.add_mention("p1-sci", 0, 12)
        engine.generate_candidates("p1")
        task = engine.serve_task("a1")
        engine.submit_annotation("a1", tuple(task["pair_key"]), "yes")
        report = validate_corpus(engine.state)
        assert report.ok
        assert report.counts["documents"] == 2
        assert report.counts["mentions"] == 3
        assert report.counts["clusters"] == 1
        assert report.counts["singleton_clusters"] == 0

    def test_out_of_bounds_mention_is_reported_not_raised(self):
        engine = make_engine()
        engine.ingest_pair(make_pair())
        engine.add_mention("p1-news", 0, 5)
        # corrupt the stored mention to simulate a bad load
        bad = Mention(
            mention_id="bad",
            doc_id="p1-news",
            start_char=0,
            end_char=10_000,
            surface="?",
        )
        engine.state.mentions["bad"] = bad
        report = validate_corpus(engine.state)
        assert not report.ok
        assert any("outside summary" in v for v in report.violations)
