"""The numba and numpy kernel paths must agree to float precision."""

from __future__ import annotations

import subprocess
import sys

import numpy as np
import pytest

from crossdoc import _kernels


requires_numba = pytest.mark.skipif(
    _kernels.njit is None, reason="numba backend not active"
)


class TestCosineMatrix:
    def test_numpy_path_basics(self):
        a = np.array([[1.0, 0.0], [1.0, 1.0]])
        b = np.array([[1.0, 0.0]])
        out = _kernels.cosine_matrix_np(a, b)
        assert out[0, 0] == pytest.approx(1.0)
        assert out[1, 0] == pytest.approx(0.70710678, abs=1e-8)

    @requires_numba
    def test_backends_agree(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(37, 16))
        b = rng.normal(size=(23, 16))
        np.testing.assert_allclose(
            _kernels._cosine_matrix_jit(a, b),
            _kernels.cosine_matrix_np(a, b),
            atol=1e-12,
        )

    def test_clamped(self):
        a = np.array([[1e-20, 1e-20]])
        out = _kernels.cosine_matrix(a, a)
        assert -1.0 <= out[0, 0] <= 1.0


class TestSweepAccuracy:
    def test_numpy_path(self):
        sims = np.array([0.9, 0.1, -np.inf])
        gold = np.array([1, 0, 0])
        acc = _kernels.sweep_accuracy_np(sims, gold, np.array([0.5]))
        assert acc[0] == 1.0

    @requires_numba
    def test_backends_agree(self):
        rng = np.random.default_rng(1)
        sims = rng.uniform(-1, 1, 200)
        sims[rng.integers(0, 200, 20)] = -np.inf
        gold = rng.integers(0, 2, 200)
        thresholds = np.round(0.30 + 0.01 * np.arange(51), 10)
        np.testing.assert_array_equal(
            _kernels._sweep_accuracy_jit(sims, gold.astype(np.int64), thresholds),
            _kernels.sweep_accuracy_np(sims, gold, thresholds),
        )


class TestAgglomerate:
    def random_case(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 20))
        m = rng.uniform(0, 1, size=(n, n))
        m = (m + m.T) / 2
        missing = rng.uniform(0, 1, size=(n, n)) < 0.2
        missing = missing | missing.T
        m[missing] = -np.inf
        np.fill_diagonal(m, 0.0)
        ranks = np.arange(n, dtype=np.int64)
        tau = float(rng.uniform(0.2, 0.9))
        return m, tau, ranks

    @requires_numba
    @pytest.mark.parametrize("seed", range(25))
    def test_backends_agree(self, seed):
        m, tau, ranks = self.random_case(seed)
        jit_labels = _kernels._agglomerate_jit(m, tau, ranks, 0)
        np_labels = _kernels.agglomerate_np(m, tau, ranks, 0)

        def groups(labels):
            out = {}
            for i, label in enumerate(labels.tolist()):
                out.setdefault(label, set()).add(i)
            return {frozenset(v) for v in out.values()}

        assert groups(jit_labels) == groups(np_labels)

    @requires_numba
    @pytest.mark.parametrize("linkage", [0, 1, 2])
    def test_backends_agree_across_linkages(self, linkage):
        m, tau, ranks = self.random_case(99)
        jit_labels = _kernels._agglomerate_jit(m, tau, ranks, linkage)
        np_labels = _kernels.agglomerate_np(m, tau, ranks, linkage)
        assert list(jit_labels) == list(np_labels)


class TestEnvFlag:
    def test_flag_forces_numpy_backend(self):
        code = "import crossdoc._kernels as k; print(k.backend())"
        out = subprocess.run(
            [sys.executable, "-c", code],
            capture_output=True,
            text=True,
            env={"PATH": "/usr/bin:/bin", "CROSSDOC_NUMBA": "0"},
        )
        assert out.stdout.strip() == "numpy"
