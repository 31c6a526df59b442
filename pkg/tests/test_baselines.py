from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crossdoc.baselines import (
    ScoreMatrix,
    agglomerative_cluster,
    load_external_scores,
    sweep_threshold,
    threshold_classify,
    transitive_inference,
)
from crossdoc.errors import ConflictError, FormatError, InsufficientDataError
from crossdoc.model import CandidatePair

from oracles import agglomerate_all_orders, reachability_clusters


def cp(key, sim):
    return CandidatePair(pair_key=key, pair_id="p", similarity=sim)


def matrix_of(ids, entries, default=-np.inf, diag=0.0):
    n = len(ids)
    m = np.full((n, n), default, dtype=np.float64)
    np.fill_diagonal(m, diag)
    index = {x: i for i, x in enumerate(ids)}
    for (a, b), s in entries.items():
        m[index[a], index[b]] = m[index[b], index[a]] = s
    return ScoreMatrix(mention_ids=tuple(ids), matrix=m, source_tag="test")


class TestThresholdClassify:
    def test_above_threshold(self):
        out = threshold_classify([cp(("a", "b"), 0.70)], 0.65)
        assert out[("a", "b")] == 1

    def test_boundary_inclusive(self):
        out = threshold_classify([cp(("a", "b"), 0.65)], 0.65)
        assert out[("a", "b")] == 1

    def test_below_threshold(self):
        out = threshold_classify([cp(("a", "b"), 0.64)], 0.65)
        assert out[("a", "b")] == 0

    def test_unscored_is_negative(self):
        out = threshold_classify([cp(("a", "b"), None)], 0.0)
        assert out[("a", "b")] == 0

    @given(st.lists(st.floats(-1, 1), min_size=1, max_size=50), st.floats(-1, 1), st.floats(0, 0.5))
    def test_monotone_in_threshold(self, sims, t, bump):
        pairs = [cp((f"m{i}", "z"), s) for i, s in enumerate(sims)]
        low = sum(threshold_classify(pairs, t).values())
        high = sum(threshold_classify(pairs, t + bump).values())
        assert high <= low


class TestTransitiveInference:
    def test_chain_is_closed(self):
        clusters = transitive_inference([("A", "B"), ("B", "C")])
        assert frozenset({"A", "B", "C"}) in clusters

    def test_no_links_all_singletons(self):
        clusters = transitive_inference([], mentions=["A", "B", "C"])
        assert sorted(clusters, key=min) == [frozenset({"A"}), frozenset({"B"}), frozenset({"C"})]

    @settings(max_examples=50)
    @given(st.integers(5, 50), st.data())
    def test_matches_reachability_oracle(self, n, data):
        nodes = [f"m{i}" for i in range(n)]
        n_edges = data.draw(st.integers(0, 2 * n))
        edges = [
            tuple(data.draw(st.sampled_from(nodes)) for _ in range(2))
            for _ in range(n_edges)
        ]
        edges = [(a, b) for a, b in edges if a != b]
        ours = set(transitive_inference(edges, mentions=nodes))
        assert ours == reachability_clusters(nodes, edges)

    def test_idempotent(self):
        edges = [("A", "B"), ("C", "D"), ("B", "C")]
        once = set(transitive_inference(edges))
        pairs_again = [
            (a, b)
            for cluster in once
            for a in cluster
            for b in cluster
            if a < b
        ]
        assert set(transitive_inference(pairs_again)) == once


class TestSweepThreshold:
    def test_defaults_evaluate_51_thresholds(self):
        dev = [(0.5, True), (0.2, False)]
        best_t, curve = sweep_threshold(dev)
        assert len(curve) == 51
        assert curve[0][0] == pytest.approx(0.30)
        assert curve[-1][0] == pytest.approx(0.80)

    def test_separable_set_recovers_margin(self):
        dev = [(0.9, True), (0.85, True), (0.3, False), (0.2, False)]
        best_t, curve = sweep_threshold(dev)
        assert best_t <= 0.5
        assert dict(curve)[best_t] == 1.0

    def test_tie_prefers_lowest_threshold(self):
        # all-negative golds: accuracy 1.0 for any t above every sim
        dev = [(0.1, False), (0.15, False)]
        best_t, curve = sweep_threshold(dev)
        assert best_t == pytest.approx(0.30)
        assert dict(curve)[best_t] == 1.0

    def test_empty_dev_set_is_error(self):
        with pytest.raises(InsufficientDataError):
            sweep_threshold([])

    def test_brute_force_accuracy_agreement(self):
        rng = np.random.default_rng(5)
        dev = [(float(s), bool(g)) for s, g in zip(rng.uniform(0, 1, 60), rng.integers(0, 2, 60))]
        _, curve = sweep_threshold(dev)
        for t, acc in curve:
            expected = sum(
                ((s is not None and s >= t) == g) for s, g in dev
            ) / len(dev)
            assert acc == pytest.approx(expected, abs=1e-12)


class TestAgglomerativeCluster:
    def test_block_matrix_unique_result(self):
        ids = ["A", "B", "C", "D"]
        entries = {
            ("A", "B"): 0.9,
            ("C", "D"): 0.9,
            ("A", "C"): 0.1,
            ("A", "D"): 0.1,
            ("B", "C"): 0.1,
            ("B", "D"): 0.1,
        }
        matrix = matrix_of(ids, entries)
        ours = set(agglomerative_cluster(matrix, stop_threshold=0.5))
        scores = {a: {b: entries.get((a, b), entries.get((b, a), 0.0)) for b in ids} for a in ids}
        all_orders = agglomerate_all_orders(ids, scores, tau=0.5)
        assert len(all_orders) == 1
        assert ours == set(next(iter(all_orders)))
        assert ours == {frozenset({"A", "B"}), frozenset({"C", "D"})}

    def test_tau_above_max_gives_singletons(self):
        matrix = matrix_of(["A", "B"], {("A", "B"): 0.4})
        assert set(agglomerative_cluster(matrix, stop_threshold=0.9)) == {
            frozenset({"A"}),
            frozenset({"B"}),
        }

    def test_single_mention(self):
        matrix = ScoreMatrix(mention_ids=("A",), matrix=np.zeros((1, 1)), source_tag="t")
        assert agglomerative_cluster(matrix, stop_threshold=0.5) == [frozenset({"A"})]

    def test_tau_minus_inf_one_cluster(self):
        matrix = matrix_of(["A", "B", "C"], {("A", "B"): 0.2})
        clusters = agglomerative_cluster(matrix, stop_threshold=-np.inf)
        assert clusters == [frozenset({"A", "B", "C"})]

    def test_tau_plus_inf_all_singletons(self):
        matrix = matrix_of(["A", "B", "C"], {("A", "B"): 0.9, ("B", "C"): 0.9})
        clusters = agglomerative_cluster(matrix, stop_threshold=np.inf)
        assert len(clusters) == 3

    def test_asymmetric_matrix_rejected(self):
        m = np.array([[0.0, 0.5], [0.4, 0.0]])
        with pytest.raises(FormatError):
            ScoreMatrix(mention_ids=("A", "B"), matrix=m, source_tag="t")

    def test_disconnected_blocks_match_transitive_inference(self):
        rng = np.random.default_rng(11)
        ids = [f"m{i}" for i in range(9)]
        blocks = [ids[:3], ids[3:5], ids[5:]]
        tau = 0.6
        entries = {}
        for block in blocks:
            for i, a in enumerate(block):
                for b in block[i + 1 :]:
                    entries[(a, b)] = float(rng.uniform(0.75, 0.95))
        for i, block_a in enumerate(blocks):
            for block_b in blocks[i + 1 :]:
                for a in block_a:
                    for b in block_b:
                        entries[(a, b)] = float(rng.uniform(0.0, 0.3))
        matrix = matrix_of(ids, entries)
        agg = set(agglomerative_cluster(matrix, stop_threshold=tau))
        positives = [k for k, s in entries.items() if s >= tau]
        trans = set(transitive_inference(positives, mentions=ids))
        assert agg == trans

    def test_linkage_variants(self):
        ids = ["A", "B", "C"]
        entries = {("A", "B"): 0.9, ("B", "C"): 0.6, ("A", "C"): 0.0}
        matrix = matrix_of(ids, entries)
        # single linkage chains everything; complete linkage stops at (A,B)
        assert agglomerative_cluster(matrix, 0.5, linkage="single") == [
            frozenset({"A", "B", "C"})
        ]
        assert set(agglomerative_cluster(matrix, 0.5, linkage="complete")) == {
            frozenset({"A", "B"}),
            frozenset({"C"}),
        }


class TestLoadExternalScores:
    def write(self, path, rows):
        with open(path, "w", encoding="utf-8") as fh:
            for r in rows:
                fh.write(json.dumps(r) + "\n")

    def test_full_matrix_from_three_pairs(self, tmp_path):
        path = tmp_path / "scores.jsonl"
        self.write(
            path,
            [
                {"mention_id_a": "a", "mention_id_b": "b", "score": 0.9},
                {"mention_id_a": "a", "mention_id_b": "c", "score": 0.1},
                {"mention_id_a": "b", "mention_id_b": "c", "score": 0.5},
            ],
        )
        matrix, errors = load_external_scores(path)
        assert errors == []
        assert matrix.mention_ids == ("a", "b", "c")
        assert matrix.matrix[0, 1] == 0.9

    def test_duplicate_equal_score_accepted_once(self, tmp_path):
        path = tmp_path / "scores.jsonl"
        self.write(
            path,
            [
                {"mention_id_a": "a", "mention_id_b": "b", "score": 0.9},
                {"mention_id_a": "b", "mention_id_b": "a", "score": 0.9},
            ],
        )
        matrix, errors = load_external_scores(path)
        assert errors == []
        assert matrix.matrix[0, 1] == 0.9

    def test_contradictory_duplicate_is_error(self, tmp_path):
        path = tmp_path / "scores.jsonl"
        self.write(
            path,
            [
                {"mention_id_a": "a", "mention_id_b": "b", "score": 0.9},
                {"mention_id_a": "a", "mention_id_b": "b", "score": 0.2},
            ],
        )
        with pytest.raises(ConflictError):
            load_external_scores(path)

    def test_unknown_mention_is_per_record_error(self, tmp_path):
        path = tmp_path / "scores.jsonl"
        self.write(
            path,
            [
                {"mention_id_a": "a", "mention_id_b": "zzz", "score": 0.9},
                {"mention_id_a": "a", "mention_id_b": "b", "score": 0.8},
            ],
        )
        matrix, errors = load_external_scores(path, known_mentions={"a", "b"})
        assert len(errors) == 1 and "zzz" in errors[0]
        assert matrix.mention_ids == ("a", "b")

    def test_missing_pairs_never_merge(self, tmp_path):
        path = tmp_path / "scores.jsonl"
        self.write(
            path,
            [
                {"mention_id_a": "a", "mention_id_b": "b", "score": 0.9},
                {"mention_id_a": "c", "mention_id_b": "d", "score": 0.9},
            ],
        )
        matrix, _ = load_external_scores(path)
        clusters = set(agglomerative_cluster(matrix, stop_threshold=0.5))
        assert clusters == {frozenset({"a", "b"}), frozenset({"c", "d"})}
