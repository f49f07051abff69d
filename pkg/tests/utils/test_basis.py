"""Tests for monomial bases and evaluation matrices in basis.py"""

from itertools import product
from math import comb

import numpy as np
import pytest

from tchakaloff.utils.basis import (
    CANCELLATION_TOL,
    as_nodes,
    complex_real_parts,
    complex_real_rows,
    complex_vandermonde,
    dim_complex,
    dim_real,
    enumerate_complex,
    enumerate_real,
    equilibrate_rows,
    norm_power_coefficients,
    numerical_rank,
    vandermonde,
)
from tests._utilities import row_reduction_rank


class TestEnumerateReal:
    def test_graded_lex_order(self):
        """Degree blocks in order, first exponent descending inside a block"""
        basis = enumerate_real(2, 2)
        assert basis.indices == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))

    @pytest.mark.parametrize("d,m", [(1, 0), (1, 5), (2, 3), (3, 3), (4, 2)])
    def test_length_matches_binomial(self, d, m):
        """len(basis) == C(m + d, d)"""
        assert len(enumerate_real(d, m)) == dim_real(d, m)

    @pytest.mark.parametrize("d", range(1, 7))
    def test_prefix_consistent_and_sized(self, d):
        """For m <= 10: size C(m + d, d), no duplicates, degree-(m-1) basis leads"""
        full = enumerate_real(d, 10)
        for m in range(11):
            basis = enumerate_real(d, m)
            assert len(basis) == comb(m + d, d)
            assert len(set(basis.indices)) == len(basis)
            assert full.indices[: full.prefix(m)] == basis.indices
            degrees = [sum(idx) for idx in basis]
            assert degrees == sorted(degrees)

    @pytest.mark.parametrize("d,m", [(1, 3), (2, 2), (3, 4), (4, 3)])
    def test_matches_brute_force(self, d, m):
        brute = {idx for idx in product(range(m + 1), repeat=d) if sum(idx) <= m}
        assert set(enumerate_real(d, m).indices) == brute

    def test_position_round_trip(self):
        basis = enumerate_real(3, 2)
        for k, idx in enumerate(basis):
            assert basis.position(idx) == k

    @pytest.mark.parametrize("d,m", [(0, 2), (-1, 1), (2, -1)])
    def test_invalid_arguments(self, d, m):
        with pytest.raises(ValueError):
            enumerate_real(d, m)


class TestEnumerateComplex:
    def test_column_order(self):
        """Graded by i + j, then i ascending"""
        assert enumerate_complex(2).pairs == ((0, 0), (0, 1), (1, 0), (0, 2), (1, 1), (2, 0))

    def test_length(self):
        assert len(enumerate_complex(3)) == dim_complex(3) == 10

    @pytest.mark.parametrize(
        "pair,label",
        [((0, 0), "1"), ((0, 1), "Z"), ((1, 0), "Zbar"), ((1, 1), "Zbar Z"), ((2, 1), "Zbar^2 Z")],
    )
    def test_labels(self, pair, label):
        assert enumerate_complex(3).label(pair) == label

    def test_negative_degree(self):
        with pytest.raises(ValueError):
            enumerate_complex(-1)


class TestVandermonde:
    def test_values_at_a_point(self):
        """Rows follow basis order: 1, x, y, x^2, xy, y^2"""
        V = vandermonde(enumerate_real(2, 2), [[2.0, 3.0]])
        np.testing.assert_array_equal(V[:, 0], [1, 2, 3, 4, 6, 9])

    def test_one_dimensional_nodes_accept_flat_array(self):
        V = vandermonde(enumerate_real(1, 3), np.array([1.0, 2.0]))
        np.testing.assert_array_equal(V, [[1, 1], [1, 2], [1, 4], [1, 8]])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            vandermonde(enumerate_real(2, 1), [[1.0, 2.0, 3.0]])

    def test_complex_rows(self):
        """Entry is conj(z)^i z^j"""
        z = 1 + 1j
        W = complex_vandermonde(enumerate_complex(2), [z])
        expected = [1, z, z.conjugate(), z**2, abs(z) ** 2, z.conjugate() ** 2]
        np.testing.assert_allclose(W[:, 0], expected)

    def test_complex_real_parts_layout(self):
        """Re of i <= j first, then Im of i < j"""
        basis = enumerate_complex(1)
        out = complex_real_parts(basis, [2.0, 3 + 4j, 3 - 4j])
        np.testing.assert_array_equal(out, [2.0, 3.0, 4.0])

    def test_complex_real_rows_one_per_pair(self, rng):
        """Same rank as the complex Vandermonde, one real row per pair"""
        z = rng.uniform(-1, 1, size=12) + 1j * rng.uniform(-1, 1, size=12)
        basis = enumerate_complex(3)
        rows = complex_real_rows(basis, z)
        assert rows.shape == (dim_complex(3), 12)
        W = complex_vandermonde(basis, z)
        assert numerical_rank(rows, rtol=1e-10) == numerical_rank(W, rtol=1e-10)

    def test_diagonal_pairs_have_no_imaginary_row(self):
        """zbar z on the unit circle leaves one real row, not a round-off Im row"""
        t = np.linspace(0, 2 * np.pi, 13)[:-1]
        rows = complex_real_rows(enumerate_complex(2), np.exp(1j * t))
        assert numerical_rank(equilibrate_rows(rows), rtol=1e-10) == 5

    def test_cancellation_is_zeroed(self):
        """Im z^3 at the cube roots of unity is rounding only"""
        cube_roots = np.exp(2j * np.pi * np.arange(3) / 3)
        basis = enumerate_complex(3)
        rows = complex_real_rows(basis, cube_roots)
        im_z3 = rows[len(rows) - 2]
        np.testing.assert_array_equal(im_z3, 0.0)
        assert CANCELLATION_TOL < 1e-12

    def test_as_nodes_single_point(self):
        assert as_nodes([1.0, 2.0], 2).shape == (1, 2)


class TestNumericalRank:
    @pytest.mark.parametrize(
        "matrix,rank",
        [
            (np.eye(3), 3),
            (np.array([[1.0, 2.0], [2.0, 4.0]]), 1),
            (np.zeros((3, 2)), 0),
            (np.zeros((0, 4)), 0),
        ],
    )
    def test_small_matrices(self, matrix, rank):
        assert numerical_rank(matrix) == rank

    def test_agrees_with_row_reduction(self, rng):
        """Random rank-deficient products against the elimination oracle"""
        for r in (1, 2, 4):
            M = rng.normal(size=(6, r)) @ rng.normal(size=(r, 7))
            assert numerical_rank(M, rtol=1e-10) == r == row_reduction_rank(M, 1e-10)

    def test_rtol_loosens_the_cutoff(self):
        M = np.diag([1.0, 1e-6])
        assert numerical_rank(M) == 2
        assert numerical_rank(M, rtol=1e-4) == 1

    def test_equilibrate_drops_zero_rows(self):
        out = equilibrate_rows(np.array([[3.0, 4.0], [0.0, 0.0]]))
        np.testing.assert_allclose(out, [[0.6, 0.8]])


class TestNormPowerCoefficients:
    def test_square_of_norm_squared(self):
        """(x^2 + y^2)^2 = x^4 + 2 x^2 y^2 + y^4"""
        assert norm_power_coefficients(2, 2) == {(4, 0): 1, (2, 2): 2, (0, 4): 1}

    def test_matches_direct_evaluation(self, rng):
        x = rng.normal(size=3)
        coeffs = norm_power_coefficients(3, 3)
        total = sum(c * np.prod(x ** np.array(e)) for e, c in coeffs.items())
        assert total == pytest.approx(np.dot(x, x) ** 3)
