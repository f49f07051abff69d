"""Tests for complex moment matrices, flat extraction and uniqueness certificates"""

import numpy as np
import pytest

from tchakaloff.backend.measure import ComplexMomentSequence, MeasureValidationError
from tchakaloff.backend.tcmp import (
    CertificateKind,
    MomentMatrix,
    NotFlatError,
    analyze,
    build_moment_matrix,
    extract_atoms_flat,
    find_analytic_relation,
    flatness,
    gamma_residual,
    is_flat,
    is_recursively_generated,
    psd_and_rank,
    uniqueness_certificate,
)
from tchakaloff.backend.variety import SHARP_EXAMPLES, find_roots
from tchakaloff.utils.basis import enumerate_complex
from tchakaloff.utils.settings import DEFAULT_TOL
from tests._utilities import atomic_gamma, separated_points

RANK_TOL = 1e-10
CUBE_ROOTS = np.exp(2j * np.pi * np.arange(3) / 3)
# zeros of z^2 - zbar
Z2_CONJ_ROOTS = np.concatenate([[0.0], CUBE_ROOTS])


def sparse_gamma(n_total, values):
    """Sequence with the given upper entries and zeros elsewhere."""
    upper = {(i, t - i): 0.0 for t in range(n_total + 1) for i in range(t + 1) if i <= t - i}
    upper.update(values)
    return ComplexMomentSequence.from_upper(n_total, upper)


def assert_same_atoms(found, expected, tol=1e-7):
    found = np.asarray(found)
    assert found.size == len(expected)
    for z in expected:
        assert np.min(np.abs(found - z)) < tol


class TestMomentMatrix:
    def test_entries_are_shifted_moments(self):
        """Row (k, l), column (i, j) holds gamma_{i+l, j+k}"""
        gamma = atomic_gamma([1 + 1j, -0.5j], [1.0, 2.0], 4)
        M = build_moment_matrix(gamma)
        basis = M.basis
        for r, (k, l) in enumerate(basis):
            for c, (i, j) in enumerate(basis):
                assert M.entries[r, c] == gamma[(i + l, j + k)]
        np.testing.assert_array_equal(M.entries, M.entries.conj().T)

    def test_needs_enough_data(self):
        gamma = atomic_gamma([1j], [1.0], 3)
        with pytest.raises(MeasureValidationError, match="through degree 4"):
            build_moment_matrix(gamma, 2)

    def test_non_hermitian_rejected(self):
        with pytest.raises(MeasureValidationError, match="not Hermitian"):
            MomentMatrix.from_entries(np.array([[1, 2, 0], [0, 1, 0], [0, 0, 1]]))

    def test_from_entries_sets_degree(self):
        M = MomentMatrix.from_entries(np.eye(6))
        assert M.n == 2 and M.block(1).shape == (3, 3)


class TestPsdAndFlatness:
    def test_atomic_data_is_psd_with_atom_rank(self, rng):
        points = separated_points(rng, 4)
        M = build_moment_matrix(atomic_gamma(points, np.ones(4), 6))
        result = psd_and_rank(M, rank_tol=RANK_TOL)
        assert result.is_psd
        assert result.rank == 4

    def test_indefinite_matrix(self):
        """gamma_01 = 2 with gamma_11 = 1 violates Cauchy-Schwarz"""
        gamma = sparse_gamma(2, {(0, 0): 1.0, (0, 1): 2.0, (1, 1): 1.0})
        result = psd_and_rank(build_moment_matrix(gamma))
        assert not result.is_psd
        assert result.min_eigenvalue < 0

    def test_flat_when_atoms_fit_lower_block(self, rng):
        points = separated_points(rng, 3)
        gamma = atomic_gamma(points, [0.5, 1.0, 1.5], 4)
        check = flatness(build_moment_matrix(gamma), rank_tol=RANK_TOL)
        assert check.flat
        assert check.rank_n == check.rank_n_minus_1 == 3
        assert is_flat(gamma, rank_tol=RANK_TOL)

    def test_not_flat_with_more_atoms(self, rng):
        gamma = atomic_gamma(separated_points(rng, 5), np.ones(5), 4)
        check = flatness(build_moment_matrix(gamma), rank_tol=RANK_TOL)
        assert check.rank_n == 5 and check.rank_n_minus_1 == 3
        assert not check.flat

    def test_degree_zero_rejected(self):
        with pytest.raises(ValueError):
            flatness(MomentMatrix.from_entries(np.eye(1)))


class TestRecursiveGeneration:
    def test_atomic_data_is_recursively_generated(self, rng):
        gamma = atomic_gamma(separated_points(rng, 3), np.ones(3), 4)
        check = is_recursively_generated(build_moment_matrix(gamma), rank_tol=RANK_TOL)
        assert check
        assert check.witness is None

    def test_witness_names_relation_and_multiplier(self):
        """Z = 0 on M(2) while the Z^2 column is not zero"""
        gamma = sparse_gamma(4, {(0, 0): 1.0, (2, 2): 1.0})
        check = is_recursively_generated(build_moment_matrix(gamma))
        assert not check
        relation = check.witness["relation"]
        assert list(relation) == ["Z"]
        assert relation["Z"] == pytest.approx(1.0)
        assert check.witness["multiplier"] == "z"
        assert check.relations == 2


class TestAnalyticRelation:
    def test_z_squared_equals_zbar(self):
        gamma = atomic_gamma(Z2_CONJ_ROOTS, [1.0, 0.5, 0.75, 1.25], 4)
        relation = find_analytic_relation(build_moment_matrix(gamma))
        assert relation.k == 2
        assert relation.coefficients[(1, 0)] == pytest.approx(1.0, abs=1e-9)
        for pair in [(0, 0), (0, 1)]:
            assert abs(relation.coefficients[pair]) < 1e-9

    @pytest.mark.timeout(300)
    @pytest.mark.parametrize("name", ["z2_conj", "q3"])
    def test_atoms_satisfy_the_relation(self, name):
        """Atoms on the zeros of p give a relation that vanishes on those atoms"""
        atoms = np.array(find_roots(SHARP_EXAMPLES[name]).roots)
        k = SHARP_EXAMPLES[name].k
        gamma = atomic_gamma(atoms, np.linspace(0.5, 1.5, atoms.size), 2 * k)
        relation = find_analytic_relation(build_moment_matrix(gamma))
        assert relation.k == k
        values = np.abs(relation.as_poly().evaluate(atoms))
        assert np.all(values <= 10 * DEFAULT_TOL * np.maximum(1.0, np.abs(atoms)) ** k)

    def test_none_for_generic_atoms(self, rng):
        gamma = atomic_gamma(separated_points(rng, 6), np.ones(6), 4)
        assert find_analytic_relation(build_moment_matrix(gamma)) is None


class TestExtraction:
    @pytest.mark.parametrize("n,r", [(1, 1), (2, 2), (2, 3), (3, 6)])
    def test_round_trip(self, rng, n, r):
        points = separated_points(rng, r)
        weights = rng.uniform(0.5, 1.5, size=r)
        gamma = atomic_gamma(points, weights, 2 * n)
        mu = extract_atoms_flat(gamma, rank_tol=RANK_TOL)
        assert mu.size == r
        assert_same_atoms(mu.points, points)
        assert mu.mass == pytest.approx(weights.sum(), rel=1e-9)
        assert gamma_residual(mu, gamma) <= 1e-9

    @pytest.mark.parametrize("r", range(1, 7))
    def test_unseparated_atoms_with_n_equal_r(self, rng, r):
        """Atoms drawn uniformly from the unit disk, no separation enforced"""
        points = np.sqrt(rng.uniform(size=r)) * np.exp(2j * np.pi * rng.uniform(size=r))
        weights = rng.uniform(0.5, 1.5, size=r)
        mu = extract_atoms_flat(atomic_gamma(points, weights, 2 * r), rank_tol=RANK_TOL)
        assert mu.size == r
        for z, w in zip(points, weights):
            nearest = int(np.argmin(np.abs(mu.points - z)))
            assert abs(mu.points[nearest] - z) <= 1e-8
            assert mu.weights[nearest] == pytest.approx(w, rel=1e-8)

    def test_atoms_sorted(self, rng):
        gamma = atomic_gamma(separated_points(rng, 3), np.ones(3), 4)
        z = extract_atoms_flat(gamma, rank_tol=RANK_TOL).points
        assert list(z) == sorted(z, key=lambda v: (v.real, v.imag))

    def test_not_flat_raises(self, rng):
        gamma = atomic_gamma(separated_points(rng, 5), np.ones(5), 4)
        with pytest.raises(NotFlatError, match="not flat"):
            extract_atoms_flat(gamma, rank_tol=RANK_TOL)


class TestCertificates:
    def test_flat_certificate(self, rng):
        points = separated_points(rng, 3)
        cert = uniqueness_certificate(atomic_gamma(points, np.ones(3), 4), rank_tol=RANK_TOL)
        assert cert.kind is CertificateKind.FLAT
        assert cert.paper_bound == "Prop4.1"
        assert cert.atom_bound == cert.rank == 3
        assert_same_atoms(cert.measure.points, points)

    @pytest.mark.timeout(120)
    @pytest.mark.parametrize("weights", [[0.25] * 4, [1.0, 0.5, 0.75, 1.25]])
    def test_analytic_certificate_recovers_measure(self, weights):
        gamma = atomic_gamma(Z2_CONJ_ROOTS, weights, 4)
        cert = uniqueness_certificate(gamma, rank_tol=RANK_TOL)
        assert cert.kind is CertificateKind.ANALYTIC
        assert cert.paper_bound == "Prop4.2"
        assert cert.k == 2 and cert.atom_bound == 4
        assert "conditional" in cert.note
        assert cert.extraction_error is None
        assert_same_atoms(cert.measure.points, Z2_CONJ_ROOTS)
        for z, w in zip(Z2_CONJ_ROOTS, weights):
            nearest = int(np.argmin(np.abs(cert.measure.points - z)))
            assert cert.measure.weights[nearest] == pytest.approx(w, rel=1e-7)
        assert cert.residual <= 1e-9
        doc = cert.to_dict()
        assert doc["kind"] == "Analytic" and len(doc["atoms"]) == 4

    @pytest.mark.timeout(120)
    def test_analytic_relation_without_measure(self):
        """Z = 0 forces atoms at 0, which cannot carry gamma_22 = 1"""
        gamma = sparse_gamma(4, {(0, 0): 1.0, (2, 2): 1.0})
        cert = uniqueness_certificate(gamma)
        assert cert.kind is CertificateKind.ANALYTIC
        assert cert.k == 1
        assert cert.measure is None
        assert "no nonnegative measure" in cert.extraction_error

    def test_no_certificate(self, rng):
        gamma = atomic_gamma(separated_points(rng, 6), np.ones(6), 4)
        cert = uniqueness_certificate(gamma, rank_tol=RANK_TOL)
        assert cert.kind is CertificateKind.NONE
        assert cert.measure is None
        assert cert.to_dict()["kind"] == "None"


class TestAnalyze:
    def test_report_fields(self, rng):
        gamma = atomic_gamma(separated_points(rng, 5), np.ones(5), 4)
        report = analyze(gamma, rank_tol=RANK_TOL)
        assert report["n"] == 2 and report["size"] == len(enumerate_complex(2))
        assert report["is_psd"] and not report["flat"]
        assert report["rank"] == report["min_support_size"] == 5
        assert report["rank_lower"] == 3
        assert report["recursively_generated"]
        assert report["analytic_relation"] is None

    def test_relation_reported(self):
        report = analyze(atomic_gamma(Z2_CONJ_ROOTS, np.ones(4), 4), rank_tol=RANK_TOL)
        assert report["analytic_relation"]["k"] == 2
        assert report["analytic_relation"]["atom_bound"] == 4
