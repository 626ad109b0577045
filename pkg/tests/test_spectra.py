"""Tests for the real trigonometric basis and the l1-norm constants."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from codedmask.spectra import (BasisSpec, basis_matrix, basis_vector, beta,
                               dft, inner, m_bound)


def slow_dft(a):
    """Direct O(n^2) reference transform."""
    a = np.asarray(a, dtype=float)
    n = a.size
    j, i = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return (a * np.exp(-2j * np.pi * j * i / n)).sum(axis=1)


class TestBasisSpec:
    def test_half_index_and_omega(self):
        assert BasisSpec(4).h == 2
        assert BasisSpec(5).h == 2
        assert BasisSpec(677).h == 338
        assert BasisSpec(8).omega == pytest.approx(2 * math.pi / 8)

    def test_rejects_nonpositive_n(self):
        with pytest.raises(ValueError):
            BasisSpec(0)


class TestDft:
    def test_delta_transforms_to_constant(self):
        a = np.zeros(9)
        a[0] = 1.0
        assert np.allclose(dft(a), np.ones(9))

    def test_constant_is_dc_only(self):
        out = dft(np.full(6, 2.5))
        assert out[0] == pytest.approx(15.0)
        assert np.allclose(out[1:], 0.0, atol=1e-12)

    def test_legendre_seven_is_flat(self):
        a = np.zeros(7)
        a[[1, 2, 4]] = 1.0
        power = np.abs(dft(a)) ** 2
        assert np.allclose(power[1:], 2.0, atol=1e-9)

    @pytest.mark.parametrize("n", [1, 2, 3, 8, 13, 64, 677, 1024])
    def test_matches_direct_summation(self, n):
        rng = np.random.default_rng(n)
        a = rng.standard_normal(n)
        assert np.allclose(dft(a), slow_dft(a), atol=1e-9 * max(1.0, n))

    @pytest.mark.parametrize("n", list(range(1, 17)) + [677, 1024])
    def test_parseval(self, n):
        rng = np.random.default_rng(100 + n)
        a = rng.standard_normal(n)
        lhs = np.sum(np.abs(dft(a)) ** 2)
        rhs = n * np.sum(a ** 2)
        assert lhs == pytest.approx(rhs, rel=1e-9)

    def test_conjugate_symmetry(self):
        rng = np.random.default_rng(7)
        a = rng.standard_normal(12)
        out = dft(a)
        for j in range(1, 12):
            assert out[j] == pytest.approx(np.conj(out[12 - j]))

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            dft([])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=48))
    def test_parseval_property(self, a):
        a = np.asarray(a)
        assert np.sum(np.abs(dft(a)) ** 2) == pytest.approx(
            a.size * np.sum(a ** 2), rel=1e-9, abs=1e-6)


class TestBasisVector:
    def test_constant_vector(self):
        assert np.allclose(basis_vector(4, 0), np.ones(4))

    def test_even_half_frequency_is_unscaled_alternation(self):
        assert np.allclose(basis_vector(4, 2), [1.0, -1.0, 1.0, -1.0])

    def test_low_cosine(self):
        i = np.arange(5)
        want = math.sqrt(2) * np.cos(2 * np.pi * i / 5)
        assert np.allclose(basis_vector(5, 1), want)

    def test_odd_half_frequency_keeps_sqrt2(self):
        i = np.arange(5)
        want = math.sqrt(2) * np.cos(2 * np.pi * 2 * i / 5)
        assert np.allclose(basis_vector(5, 2), want)

    def test_sine_branch(self):
        i = np.arange(7)
        want = math.sqrt(2) * np.sin(2 * np.pi * 5 * i / 7)
        assert np.allclose(basis_vector(7, 5), want)

    def test_out_of_range_index(self):
        with pytest.raises(ValueError):
            basis_vector(5, 5)
        with pytest.raises(ValueError):
            basis_vector(5, -1)

    def test_accepts_basis_spec(self):
        assert np.allclose(basis_vector(BasisSpec(6), 1), basis_vector(6, 1))

    @pytest.mark.parametrize("n", list(range(1, 17)) + [31, 64])
    def test_orthonormality(self, n):
        B = basis_matrix(n)
        G = (B @ B.T) / n
        assert np.allclose(G, np.eye(n), atol=1e-10)

    @pytest.mark.parametrize("n", [8, 13, 20])
    def test_pairs_reconstruct_dft_power(self, n):
        # |(a,psi_j)|^2 + |(a,psi_{n-j})|^2 == (2/n^2)|a_hat_j|^2 off DC.
        rng = np.random.default_rng(n)
        a = rng.standard_normal(n)
        ahat = dft(a)
        h = BasisSpec(n).h
        for j in range(1, h):
            lhs = inner(a, basis_vector(n, j)) ** 2 \
                + inner(a, basis_vector(n, n - j)) ** 2
            assert lhs == pytest.approx(2.0 / n ** 2 * np.abs(ahat[j]) ** 2,
                                        abs=1e-10)


class TestInner:
    def test_is_mean_of_products(self):
        assert inner([1, 2, 3], [4, 5, 6]) == pytest.approx((4 + 10 + 18) / 3)


class TestBeta:
    def test_n_equal_one(self):
        assert beta(1) == 1.0

    @pytest.mark.parametrize("n", [4, 8, 12, 1024])
    def test_multiples_of_four_hit_quarter_frequency(self, n):
        assert beta(n) == pytest.approx(1 / math.sqrt(2), abs=1e-12)

    def test_large_prime_approaches_sine_mean(self):
        assert abs(beta(10007) - 2 * math.sqrt(2) / math.pi) < 2e-3

    @pytest.mark.parametrize("n", list(range(1, 41)))
    def test_matches_full_scan(self, n):
        want = min(float(np.mean(np.abs(basis_vector(n, j))))
                   for j in range(n))
        assert beta(n) == pytest.approx(want, abs=1e-12)

    @pytest.mark.parametrize("n", [3, 5, 16, 100, 677, 2048, 10007])
    def test_within_global_bracket(self, n):
        # n = 1 and n = 2 sit outside this bracket (their only vectors have
        # unit l1 norm); the window is meaningful once a true oscillating
        # frequency exists.
        assert 1 / math.sqrt(2) - 1e-9 <= beta(n) <= 2 * math.sqrt(2) / math.pi + 0.05

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            beta(0)


class TestMBound:
    def test_n_equal_one(self):
        assert m_bound(1) == pytest.approx(1.5 * math.pi)

    def test_multiples_of_four(self):
        assert m_bound(8) == pytest.approx(3 * math.pi, abs=1e-9)

    def test_large_prime_limit(self):
        assert m_bound(10007) == pytest.approx(3 * math.pi ** 3 / 16, abs=1e-2)

    @pytest.mark.parametrize("n", [100, 128, 677, 997, 2048])
    def test_window_for_moderate_n(self, n):
        assert 3 * math.pi ** 3 / 16 - 0.05 <= m_bound(n) <= 3 * math.pi + 0.05
