import numpy as np
import pytest
from hypothesis import given, strategies as st

from xlmimo.model import (Constellation, SubArrayIndexing, UnderflowError,
                          belief_mean_var, delta_belief, gaussian_to_belief,
                          is_valid_pmf, normalize, normalize_log_rows,
                          partition)


class TestConstellation:
    def test_qpsk_unit_energy_and_order(self):
        c = Constellation.qpsk()
        assert c.size == 4
        assert abs(np.mean(np.abs(c.symbols) ** 2) - 1.0) < 1e-12
        s = 1 / np.sqrt(2)
        np.testing.assert_allclose(
            c.symbols, [s + 1j * s, -s + 1j * s, -s - 1j * s, s - 1j * s])

    def test_rejects_bad_alphabets(self):
        with pytest.raises(ValueError):
            Constellation(np.array([1.0 + 0j]))
        with pytest.raises(ValueError):
            Constellation(np.array([2.0 + 0j, -2.0 + 0j]))  # energy 4
        with pytest.raises(ValueError):
            Constellation(np.array([1.0 + 0j, 1.0 + 0j]))

    def test_nearest_tie_breaks_low_index(self):
        c = Constellation.qpsk()
        # the origin is equidistant from all four points
        assert c.nearest(np.array([0.0 + 0j]))[0] == 0


class TestNormalize:
    def test_uniform_scaling(self):
        np.testing.assert_allclose(normalize(np.array([2.0, 2, 2, 2])),
                                   [0.25, 0.25, 0.25, 0.25])

    def test_delta_untouched(self):
        np.testing.assert_allclose(normalize(np.array([1.0, 0, 0, 0])),
                                   [1, 0, 0, 0])

    def test_idempotent_on_pmf(self):
        p = np.array([0.2, 0.6, 0.2, 0.0])
        np.testing.assert_allclose(normalize(p), p)

    def test_all_zero_signals_underflow(self):
        with pytest.raises(UnderflowError):
            normalize(np.zeros(4))

    @given(st.lists(st.floats(min_value=1e-12, max_value=1e12),
                    min_size=2, max_size=8))
    def test_sums_to_one_and_keeps_argmax(self, weights):
        w = np.array(weights)
        p = normalize(w)
        assert abs(p.sum() - 1.0) < 1e-9
        assert np.argmax(p) == np.argmax(w)


class TestGaussianToBelief:
    def test_vanishing_variance_gives_delta(self):
        c = Constellation.qpsk()
        p = gaussian_to_belief(c.symbols[1], 1e-300, c)
        np.testing.assert_allclose(p, delta_belief(1, 4))

    def test_equidistant_mean_gives_uniform(self):
        c = Constellation.qpsk()
        np.testing.assert_allclose(gaussian_to_belief(0.0, 1.7, c),
                                   np.full(4, 0.25), atol=1e-14)

    def test_against_high_precision_oracle(self):
        # frozen via mpmath at 50 digits: pmf[i] ~ exp(-|a_i - (0.5+0.5j)|^2)
        c = Constellation.qpsk()
        expected = [0.64710711409824348832, 0.15732256840871341687,
                    0.038247749084329677935, 0.15732256840871341687]
        got = gaussian_to_belief(0.5 + 0.5j, 1.0, c)
        np.testing.assert_allclose(got, expected, atol=1e-12)

    def test_invalid_variance(self):
        c = Constellation.qpsk()
        with pytest.raises(ValueError):
            gaussian_to_belief(0.1, 0.0, c)
        with pytest.raises(ValueError):
            gaussian_to_belief(0.1, -1.0, c)

    @given(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9),
           st.floats(0.01, 10.0), st.floats(-30.0, 30.0))
    def test_log_shift_invariance(self, re, im, var, shift):
        # adding a constant to every log density does not change the pmf
        c = Constellation.qpsk()
        logp = -np.abs(c.symbols - (re + 1j * im)) ** 2 / var
        np.testing.assert_allclose(normalize_log_rows(logp),
                                   normalize_log_rows(logp + shift),
                                   atol=1e-12)


class TestBeliefStats:
    def test_delta_has_zero_variance(self):
        c = Constellation.qpsk()
        mean, var = belief_mean_var(delta_belief(2, 4), c)
        assert mean == c.symbols[2]
        assert var == 0.0

    def test_uniform_qpsk_stats(self):
        c = Constellation.qpsk()
        mean, var = belief_mean_var(np.full(4, 0.25), c)
        assert abs(mean) < 1e-15
        assert abs(var - 1.0) < 1e-12


class TestPartition:
    def test_contiguous_split(self):
        idx = SubArrayIndexing(M=4, B=2)
        H = np.arange(8).reshape(4, 2).astype(complex)
        y = np.arange(4).astype(complex)
        blocks = partition(H, y, idx)
        assert len(blocks) == 2
        np.testing.assert_array_equal(blocks[0][0], H[:2])
        np.testing.assert_array_equal(blocks[1][1], y[2:])

    def test_single_block_is_identity(self):
        idx = SubArrayIndexing(M=3, B=1)
        H = np.random.default_rng(0).normal(size=(3, 2)) + 0j
        y = np.ones(3, complex)
        (Hb, yb), = partition(H, y, idx)
        np.testing.assert_array_equal(Hb, H)
        np.testing.assert_array_equal(yb, y)

    def test_rows_stay_in_order(self):
        idx = SubArrayIndexing(M=6, B=3)
        H = (np.arange(6)[:, None] * np.ones(2)).astype(complex)
        y = np.arange(6).astype(complex)
        for b, (Hb, yb) in enumerate(partition(H, y, idx)):
            np.testing.assert_array_equal(Hb[:, 0].real, [2 * b, 2 * b + 1])
            np.testing.assert_array_equal(yb.real, [2 * b, 2 * b + 1])

    @given(st.integers(1, 6), st.integers(1, 5), st.integers(1, 3))
    def test_concatenation_restores_input(self, B, mb, K):
        M = B * mb
        rng = np.random.default_rng(B * 100 + mb * 10 + K)
        H = rng.normal(size=(M, K)) + 1j * rng.normal(size=(M, K))
        y = rng.normal(size=M) + 1j * rng.normal(size=M)
        blocks = partition(H, y, SubArrayIndexing(M=M, B=B))
        np.testing.assert_array_equal(np.vstack([b[0] for b in blocks]), H)
        np.testing.assert_array_equal(np.concatenate([b[1] for b in blocks]), y)

    def test_indexing_requires_divisibility(self):
        with pytest.raises(ValueError):
            SubArrayIndexing(M=5, B=2)

    def test_dimension_mismatch(self):
        idx = SubArrayIndexing(M=4, B=2)
        with pytest.raises(ValueError):
            partition(np.zeros((3, 2), complex), np.zeros(4, complex), idx)


def test_is_valid_pmf():
    assert is_valid_pmf(np.array([0.5, 0.5]))
    assert not is_valid_pmf(np.array([0.5, 0.6]))
    assert not is_valid_pmf(np.array([-0.1, 1.1]))
