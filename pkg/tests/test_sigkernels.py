"""Tests for signature kernels against the feature-kernel duality oracle."""

import numpy as np
import pytest

from seqsig.errors import (
    CapacityError,
    ConfigurationError,
    DegenerateDataError,
    ShapeError,
    UnsupportedError,
)
from seqsig.seqdata import Sequence, SequenceBatch
from seqsig.sigfeatures import SignatureConfig, signature
from seqsig.sigkernels import (
    ALPHA_GRID,
    GramConfig,
    StaticKernelSpec,
    cross_gram,
    gram,
    inducing_gram,
    median_bandwidth,
    static_eval,
)
from seqsig.tensoralg import Rank1Element, densify, inner


def random_batch(rng, n, max_len, dim, min_len=1):
    seqs = [
        Sequence(rng.standard_normal((int(rng.integers(min_len, max_len + 1)) + 1, dim)))
        for _ in range(n)
    ]
    return SequenceBatch(seqs)


def random_rank1(rng, dim, trunc):
    return Rank1Element(
        dim,
        trunc,
        float(rng.standard_normal()),
        [[rng.standard_normal(dim) for _ in range(m)] for m in range(1, trunc + 1)],
    )


class TestStaticEval:
    def test_linear(self):
        assert static_eval([1, 2], [3, 4], StaticKernelSpec("linear")) == pytest.approx(11.0)

    def test_rbf_self_is_one(self):
        spec = StaticKernelSpec("rbf", sigma=0.7)
        assert static_eval([1.0, -2.0], [1.0, -2.0], spec) == pytest.approx(1.0)

    def test_rbf_large_bandwidth_tends_to_one(self):
        spec = StaticKernelSpec("rbf", sigma=1e8)
        assert static_eval([0.0], [3.0], spec) == pytest.approx(1.0, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            static_eval([1.0], [1.0, 2.0], StaticKernelSpec("linear"))

    def test_bad_bandwidth_rejected(self):
        with pytest.raises(ConfigurationError):
            StaticKernelSpec("rbf", sigma=0.0)


class TestGram:
    def test_hand_example_order_one(self):
        X = SequenceBatch([Sequence(np.array([[0.0], [1.0], [2.0]]))])
        Y = SequenceBatch([Sequence(np.array([[0.0], [1.0]]))])
        result = gram(X, Y, GramConfig(trunc=1, order=1))
        assert result.levels[0][0, 0] == pytest.approx(2.0)
        assert result.combined[0, 0] == pytest.approx(3.0)

    def test_duality_with_linear_lift(self):
        rng = np.random.default_rng(0)
        for _ in range(6):
            M = int(rng.integers(1, 4))
            p = int(rng.choice([1, M]))
            d = int(rng.integers(1, 3))
            X = random_batch(rng, 3, 5, d)
            Y = random_batch(rng, 4, 5, d)
            result = gram(X, Y, GramConfig(trunc=M, order=p))
            sig_cfg = SignatureConfig(trunc=M, order=p)
            feats_x = [signature(s, sig_cfg) for s in X]
            feats_y = [signature(s, sig_cfg) for s in Y]
            for m in range(1, M + 1):
                expected = np.array(
                    [[float(fx.levels[m] @ fy.levels[m]) for fy in feats_y] for fx in feats_x]
                )
                scale = max(1.0, np.abs(expected).max())
                np.testing.assert_allclose(result.levels[m - 1], expected, atol=1e-8 * scale)

    def test_symmetric_gram(self):
        rng = np.random.default_rng(1)
        X = random_batch(rng, 5, 6, 2)
        result = gram(X, None, GramConfig(trunc=2, order=1))
        np.testing.assert_allclose(result.combined, result.combined.T, atol=1e-12)

    def test_psd(self):
        rng = np.random.default_rng(2)
        X = random_batch(rng, 8, 6, 2)
        cfg = GramConfig(trunc=3, order=2, static=StaticKernelSpec("rbf", sigma=1.5))
        K = gram(X, None, cfg).combined
        eigs = np.linalg.eigvalsh(K)
        assert eigs.min() >= -1e-8 * np.trace(K)

    def test_normalized_self_kernel(self):
        # levels up to M are nonzero only when every sequence has >= M increments
        rng = np.random.default_rng(3)
        M = 3
        X = random_batch(rng, 4, 5, 2, min_len=M)
        result = gram(X, None, GramConfig(trunc=M, order=1, normalize=True))
        np.testing.assert_allclose(np.diag(result.combined), M + 1.0, atol=1e-10)

    def test_rbf_large_bandwidth_kills_higher_levels(self):
        rng = np.random.default_rng(4)
        X = random_batch(rng, 3, 5, 2)
        cfg = GramConfig(trunc=2, order=1, static=StaticKernelSpec("rbf", sigma=1e7))
        result = gram(X, None, cfg)
        for mat in result.levels:
            np.testing.assert_allclose(mat, 0.0, atol=1e-8)

    def test_warping_invariance(self):
        rng = np.random.default_rng(5)
        base = rng.standard_normal((5, 2))
        warped = np.insert(base, 2, base[2], axis=0)
        X = SequenceBatch([Sequence(base)])
        Xw = SequenceBatch([Sequence(warped)])
        Y = random_batch(rng, 3, 4, 2)
        cfg = GramConfig(trunc=3, order=2, static=StaticKernelSpec("rbf", sigma=1.0))
        a = gram(X, Y, cfg).combined
        b = gram(Xw, Y, cfg).combined
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_zero_length_sequence_contributes_nothing(self):
        X = SequenceBatch([Sequence(np.array([[1.0, 2.0]]))])
        result = gram(X, None, GramConfig(trunc=2, order=1))
        np.testing.assert_allclose(result.combined, 1.0)

    def test_cell_cap(self):
        rng = np.random.default_rng(6)
        X = random_batch(rng, 4, 6, 2)
        with pytest.raises(CapacityError):
            gram(X, None, GramConfig(trunc=2, order=1, cell_cap=10))

    def test_jobs_match_sequential(self):
        rng = np.random.default_rng(7)
        X = random_batch(rng, 6, 5, 2)
        cfg = GramConfig(trunc=2, order=2)
        a = gram(X, None, cfg, jobs=1).combined
        b = gram(X, None, cfg, jobs=3).combined
        np.testing.assert_allclose(a, b, atol=1e-12)


class TestMedianBandwidth:
    def test_two_states(self):
        X = SequenceBatch([Sequence(np.array([[0.0], [2.0]]))])
        assert median_bandwidth(X, 1.0) == pytest.approx(1.0)

    def test_scaling_homogeneity(self):
        rng = np.random.default_rng(8)
        vals = rng.standard_normal((6, 2))
        X = SequenceBatch([Sequence(vals)])
        Xs = SequenceBatch([Sequence(3.0 * vals)])
        assert median_bandwidth(Xs, 0.5) == pytest.approx(3.0 * median_bandwidth(X, 0.5))

    def test_degenerate_data(self):
        X = SequenceBatch([Sequence(np.ones((4, 2)))])
        with pytest.raises(DegenerateDataError):
            median_bandwidth(X, 1.0)

    def test_alpha_grid_matches_cli_default(self):
        assert len(ALPHA_GRID) == 19
        assert ALPHA_GRID[0] == pytest.approx(1e-3)
        assert ALPHA_GRID[-1] == pytest.approx(1e3)
        ratios = np.diff(np.log10(ALPHA_GRID))
        np.testing.assert_allclose(ratios, ratios[0])


class TestInducingGram:
    def test_scalar_only(self):
        z = Rank1Element(2, 2, 1.0, [[np.zeros(2)], [np.zeros(2), np.zeros(2)]])
        K = inducing_gram([z], np.array([1.0, 1.0, 1.0]))
        np.testing.assert_allclose(K, [[1.0]])

    def test_matches_densify_oracle(self):
        rng = np.random.default_rng(9)
        d, M, n = 3, 3, 4
        Z = [random_rank1(rng, d, M) for _ in range(n)]
        sigmas = rng.uniform(0.5, 2.0, size=M + 1)
        K = inducing_gram(Z, sigmas)
        dense = [densify(z) for z in Z]
        for i in range(n):
            for j in range(n):
                expected = sum(
                    sigmas[m] ** 2 * float(dense[i].levels[m] @ dense[j].levels[m])
                    for m in range(M + 1)
                )
                assert K[i, j] == pytest.approx(expected, abs=1e-10)

    def test_orthogonal_level1(self):
        z1 = Rank1Element(2, 1, 1.0, [[np.array([1.0, 0.0])]])
        z2 = Rank1Element(2, 1, 1.0, [[np.array([0.0, 1.0])]])
        K = inducing_gram([z1, z2], np.array([2.0, 1.0]))
        assert K[0, 1] == pytest.approx(4.0)  # sigma_0^2 only


class TestCrossGram:
    def test_level1_hand_value(self):
        z = Rank1Element(1, 1, 0.0, [[np.array([1.0])]])
        X = SequenceBatch([Sequence(np.array([[0.0], [1.0], [2.0]]))])
        K = cross_gram([z], X, GramConfig(trunc=1, order=1))
        assert K[0, 0] == pytest.approx(2.0)

    def test_matches_signature_oracle(self):
        rng = np.random.default_rng(10)
        d, M = 2, 3
        Z = [random_rank1(rng, d, M) for _ in range(3)]
        X = random_batch(rng, 4, 6, d)
        sigmas = rng.uniform(0.5, 1.5, size=M + 1)
        K = cross_gram(Z, X, GramConfig(trunc=M, order=1), sigmas=sigmas)
        for j, seq in enumerate(X):
            sig = signature(seq, SignatureConfig(trunc=M, order=1))
            for i, z in enumerate(Z):
                dense = densify(z)
                expected = sum(
                    sigmas[m] ** 2 * float(dense.levels[m] @ sig.levels[m])
                    for m in range(M + 1)
                )
                assert K[i, j] == pytest.approx(expected, abs=1e-10)

    def test_constant_sequence_scalar_only(self):
        rng = np.random.default_rng(11)
        z = random_rank1(rng, 2, 2)
        X = SequenceBatch([Sequence(np.ones((4, 2)))])
        K = cross_gram([z], X, GramConfig(trunc=2, order=1), sigmas=[2.0, 1.0, 1.0])
        assert K[0, 0] == pytest.approx(4.0 * z.scalar)

    def test_nonlinear_lift_rejected(self):
        rng = np.random.default_rng(12)
        z = random_rank1(rng, 2, 2)
        X = random_batch(rng, 2, 4, 2)
        cfg = GramConfig(trunc=2, order=1, static=StaticKernelSpec("rbf", sigma=1.0))
        with pytest.raises(UnsupportedError):
            cross_gram([z], X, cfg)
