"""Tests for the sequence data model and augmentations."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqsig.errors import ConfigurationError, InputError, ShapeError
from seqsig.seqdata import (
    Sequence,
    SequenceBatch,
    augment,
    increments,
    one_variation,
    read_sequence_csv,
    tabulate,
    write_sequence_csv,
)


def seq(*rows):
    return Sequence(np.array(rows, dtype=float))


class TestAugment:
    def test_time_prepends_scaled_index(self):
        out = augment(seq([1], [2]), "time")
        np.testing.assert_allclose(out.values, [[0, 1], [1, 2]])

    def test_time_scale(self):
        out = augment(seq([1], [2], [3]), "time:2")
        np.testing.assert_allclose(out.values[:, 0], [0, 1, 2])

    def test_time_on_single_observation_is_zero(self):
        out = augment(seq([5.0]), "time")
        np.testing.assert_allclose(out.values, [[0, 5]])

    def test_time_tau_zero_gives_constant_channel(self):
        out = augment(seq([1], [2], [4]), "time:0")
        np.testing.assert_allclose(increments(out)[:, 0], 0.0)

    def test_basepoint(self):
        out = augment(seq([1], [2]), "basepoint")
        np.testing.assert_allclose(out.values, [[0], [1], [2]])

    def test_lead_lag(self):
        out = augment(seq([1.0], [2.0]), "lead_lag")
        np.testing.assert_allclose(out.values, [[1, 1], [2, 1], [2, 2]])

    def test_lead_lag_shape(self):
        out = augment(seq([1, 0], [2, 1], [3, 2]), "leadlag")
        assert out.values.shape == (2 * 2 + 1, 4)

    def test_composition_left_to_right(self):
        composed = augment(seq([1], [2]), ["basepoint", "time"])
        manual = augment(augment(seq([1], [2]), "basepoint"), "time")
        np.testing.assert_allclose(composed.values, manual.values)

    def test_unknown_spec_rejected(self):
        with pytest.raises(ConfigurationError):
            augment(seq([1]), "fourier")

    def test_negative_time_scale_rejected(self):
        with pytest.raises(ConfigurationError):
            augment(seq([1]), "time:-1")


class TestTabulate:
    def test_pads_by_repeating_last_state(self):
        batch = SequenceBatch([seq([1], [2]), seq([5])])
        out = tabulate(batch)
        np.testing.assert_allclose(out.sequences[1].values, [[5], [5]])
        assert out.original_lengths == [1, 0]

    def test_uniform_batch_unchanged(self):
        batch = SequenceBatch([seq([1], [2]), seq([3], [4])])
        out = tabulate(batch)
        for a, b in zip(out, batch):
            np.testing.assert_allclose(a.values, b.values)

    def test_idempotent(self):
        batch = SequenceBatch([seq([1], [2], [3]), seq([5])])
        once = tabulate(batch)
        twice = tabulate(once)
        for a, b in zip(once, twice):
            np.testing.assert_allclose(a.values, b.values)

    def test_empty_batch_rejected(self):
        with pytest.raises(InputError):
            SequenceBatch([])

    def test_mixed_dims_rejected(self):
        with pytest.raises(ShapeError):
            SequenceBatch([seq([1]), seq([1, 2])])


class TestIncrements:
    def test_basic(self):
        np.testing.assert_allclose(increments(seq([0], [1], [3])), [[1], [2]])

    def test_constant_sequence(self):
        np.testing.assert_allclose(increments(seq([2], [2], [2])), 0.0)

    def test_single_observation_empty(self):
        assert increments(seq([7])).shape == (0, 1)

    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=12))
    def test_telescoping(self, xs):
        s = Sequence(np.array(xs).reshape(-1, 1))
        np.testing.assert_allclose(increments(s).sum(), xs[-1] - xs[0], atol=1e-9)


class TestOneVariation:
    def test_basic(self):
        assert one_variation(seq([0], [1], [3])) == pytest.approx(3.0)

    def test_constant_is_zero(self):
        assert one_variation(seq([4], [4])) == 0.0

    def test_single_observation_is_zero(self):
        assert one_variation(seq([4])) == 0.0

    @settings(max_examples=30)
    @given(st.lists(st.floats(-10, 10), min_size=2, max_size=8), st.integers(0, 6))
    def test_duplicate_insertion_invariant(self, xs, pos):
        pos = min(pos, len(xs) - 1)
        s = Sequence(np.array(xs).reshape(-1, 1))
        dup = xs[: pos + 1] + [xs[pos]] + xs[pos + 1 :]
        s2 = Sequence(np.array(dup).reshape(-1, 1))
        assert one_variation(s) == pytest.approx(one_variation(s2), abs=1e-9)


class TestCsvRoundtrip:
    def test_roundtrip(self, tmp_path):
        batch = SequenceBatch([seq([1, 2], [3, 4]), seq([5, 6])])
        path = tmp_path / "batch.csv"
        write_sequence_csv(path, batch, ids=["a", "b"])
        loaded, ids = read_sequence_csv(path)
        assert ids == ["a", "b"]
        for a, b in zip(loaded, batch):
            np.testing.assert_allclose(a.values, b.values)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("foo,bar\n1,2\n")
        with pytest.raises(InputError):
            read_sequence_csv(path)

    def test_bad_value_reports_location(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,step,c0\na,0,1.0\na,1,oops\n")
        with pytest.raises(InputError, match=":3"):
            read_sequence_csv(path)
