"""Tests for the truncated tensor algebra."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqsig.errors import CapacityError, DomainError, ShapeError
from seqsig.tensoralg import (
    Rank1Element,
    TruncatedTensorSeries,
    algebra_mul,
    densify,
    inner,
    inverse,
    tensor_exp,
    unit,
    zero,
)


def random_series(rng, dim, trunc, scalar=None):
    levels = [rng.standard_normal(dim ** m) for m in range(trunc + 1)]
    if scalar is not None:
        levels[0][0] = scalar
    return TruncatedTensorSeries(dim, trunc, levels)


class TestAlgebraMul:
    def test_unit_is_left_identity(self):
        rng = np.random.default_rng(0)
        b = random_series(rng, 2, 3)
        assert algebra_mul(unit(2, 3), b).allclose(b)

    def test_unit_is_right_identity(self):
        rng = np.random.default_rng(1)
        a = random_series(rng, 3, 2)
        assert algebra_mul(a, unit(3, 2)).allclose(a)

    def test_d1_hand_expansion(self):
        # (1 + 2t) * (1 + 3t) = 1 + 5t + 6t^2 in the d=1 algebra
        a = TruncatedTensorSeries(1, 2, [[1.0], [2.0], [0.0]])
        b = TruncatedTensorSeries(1, 2, [[1.0], [3.0], [0.0]])
        out = algebra_mul(a, b)
        np.testing.assert_allclose(out.flatten(), [1.0, 5.0, 6.0])

    def test_noncommutative_for_d2(self):
        u = np.array([1.0, 0.0])
        v = np.array([0.0, 1.0])
        a = TruncatedTensorSeries(2, 2, [np.ones(1), u, np.zeros(4)])
        b = TruncatedTensorSeries(2, 2, [np.ones(1), v, np.zeros(4)])
        ab = algebra_mul(a, b)
        ba = algebra_mul(b, a)
        assert not np.allclose(ab.levels[2], ba.levels[2])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            algebra_mul(unit(2, 2), unit(3, 2))
        with pytest.raises(ShapeError):
            algebra_mul(unit(2, 2), unit(2, 3))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_associative(self, seed):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(1, 4))
        M = int(rng.integers(0, 4))
        a, b, c = (random_series(rng, d, M) for _ in range(3))
        lhs = algebra_mul(algebra_mul(a, b), c)
        rhs = algebra_mul(a, algebra_mul(b, c))
        assert lhs.allclose(rhs, atol=1e-12)


class TestTensorExp:
    def test_zero_vector_gives_unit(self):
        assert tensor_exp(np.zeros(3), 2).allclose(unit(3, 2))

    def test_d1_values(self):
        out = tensor_exp(np.array([2.0]), 3)
        np.testing.assert_allclose(out.flatten(), [1.0, 2.0, 2.0, 4.0 / 3.0])

    def test_exp_times_exp_neg_is_unit_d1(self):
        v = np.array([0.7])
        prod = algebra_mul(tensor_exp(v, 4), tensor_exp(-v, 4))
        assert prod.allclose(unit(1, 4), atol=1e-12)


class TestInverse:
    def test_unit_inverse_is_unit(self):
        assert inverse(unit(2, 3)).allclose(unit(2, 3))

    def test_geometric_series_for_one_plus_u(self):
        u = np.array([0.5, -0.25])
        a = TruncatedTensorSeries(2, 3, [np.ones(1), u, np.zeros(4), np.zeros(8)])
        inv = inverse(a)
        np.testing.assert_allclose(inv.levels[1], -u, atol=1e-12)
        np.testing.assert_allclose(inv.levels[2], np.outer(u, u).ravel(), atol=1e-12)
        uuu = np.einsum("i,j,k->ijk", u, u, u).ravel()
        np.testing.assert_allclose(inv.levels[3], -uuu, atol=1e-12)

    def test_right_inverse_property(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            a = random_series(rng, 2, 3, scalar=1.0)
            assert algebra_mul(a, inverse(a)).allclose(unit(2, 3), atol=1e-12)

    def test_zero_scalar_rejected(self):
        a = zero(2, 2)
        with pytest.raises(DomainError):
            inverse(a)


class TestInner:
    def test_unit_unit(self):
        assert inner(unit(2, 3), unit(2, 3)) == pytest.approx(1.0)

    def test_exp_exp_d1(self):
        a = tensor_exp(np.array([1.0]), 2)
        assert inner(a, a) == pytest.approx(1 + 1 + 0.25)

    def test_symmetry_and_bilinearity(self):
        rng = np.random.default_rng(3)
        a, b, c = (random_series(rng, 2, 2) for _ in range(3))
        assert inner(a, b) == pytest.approx(inner(b, a))
        two_b_plus_c = TruncatedTensorSeries(
            2, 2, [2 * x + y for x, y in zip(b.levels, c.levels)]
        )
        assert inner(a, two_b_plus_c) == pytest.approx(2 * inner(a, b) + inner(a, c))

    def test_positive_on_nonzero(self):
        rng = np.random.default_rng(4)
        a = random_series(rng, 3, 2)
        assert inner(a, a) > 0


class TestRank1:
    def test_densify_level1(self):
        r = Rank1Element(2, 1, 0.5, [[np.array([1.0, 2.0])]])
        dense = densify(r)
        np.testing.assert_allclose(dense.flatten(), [0.5, 1.0, 2.0])

    def test_inner_products_factorize(self):
        rng = np.random.default_rng(11)
        d, M = 3, 3
        r1 = Rank1Element(d, M, rng.standard_normal(), [
            [rng.standard_normal(d) for _ in range(m)] for m in range(1, M + 1)
        ])
        r2 = Rank1Element(d, M, rng.standard_normal(), [
            [rng.standard_normal(d) for _ in range(m)] for m in range(1, M + 1)
        ])
        expected = r1.scalar * r2.scalar
        for m in range(1, M + 1):
            prod = 1.0
            for v, w in zip(r1.level_components(m), r2.level_components(m)):
                prod *= float(v @ w)
            expected += prod
        assert inner(densify(r1), densify(r2)) == pytest.approx(expected, rel=1e-12)

    def test_zero_component_zeroes_level(self):
        r = Rank1Element(2, 2, 1.0, [
            [np.array([1.0, 1.0])],
            [np.array([0.0, 0.0]), np.array([1.0, 2.0])],
        ])
        dense = densify(r)
        np.testing.assert_allclose(dense.levels[2], 0.0)

    def test_component_count_enforced(self):
        with pytest.raises(ShapeError):
            Rank1Element(2, 2, 1.0, [[np.ones(2)], [np.ones(2)]])


class TestCapacityGuard:
    def test_large_dense_tensor_refused(self):
        with pytest.raises(CapacityError):
            unit(10, 8)
