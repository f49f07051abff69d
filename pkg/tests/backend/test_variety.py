"""Tests for the zero sets of z^k - q(z, zbar) in variety.py"""

import io
import json
from unittest.mock import patch

import numpy as np
import pytest

from tchakaloff.backend.variety import (
    SHARP_EXAMPLES,
    AnalyticPoly,
    apriori_radius,
    find_roots,
    isolation_radii,
    rank_audit,
    read_poly,
    root_count_bound,
    search_radius,
    write_poly,
)


def assert_valid_roots(p, roots, tol=1e-9):
    z = np.array(roots.roots)
    assert np.all(np.abs(p.evaluate(z)) <= tol * np.maximum(1.0, np.abs(z)) ** p.k)
    assert np.all(np.abs(z) <= roots.box_radius)
    if z.size > 1:
        gaps = np.abs(z[:, None] - z[None, :])
        assert np.min(gaps[np.triu_indices(z.size, 1)]) > 0


class TestAnalyticPoly:
    def test_evaluate_and_derivatives(self):
        """p = z^2 - zbar: p_z = 2z, p_zbar = -1"""
        p = SHARP_EXAMPLES["z2_conj"]
        assert p.evaluate(1.0) == 0
        value, pz, pzb = p.derivatives(np.array([2j]))
        assert value[0] == pytest.approx(-4 + 2j)
        assert pz[0] == pytest.approx(4j)
        assert pzb[0] == pytest.approx(-1)

    def test_zero_coefficients_dropped(self):
        assert AnalyticPoly(2, {(0, 0): 0, (1, 0): 1}).q_coeffs == {(1, 0): 1 + 0j}

    @pytest.mark.parametrize(
        "k,coeffs,message",
        [(0, {}, "invalid degree"), (2, {(1, 1): 1}, "needs i \\+ j < k"), (2, {(-1, 0): 1}, "")],
    )
    def test_invalid(self, k, coeffs, message):
        with pytest.raises(ValueError, match=message):
            AnalyticPoly(k, coeffs)

    @pytest.mark.parametrize("name", ["q3", "q5"])
    def test_taylor_bound_covers_increments(self, rng, name):
        """Order 1 bounds p(z+h) - p(z); order 2 bounds what the linear part leaves"""
        p = SHARP_EXAMPLES[name]
        z = rng.uniform(-2, 2, size=200) + 1j * rng.uniform(-2, 2, size=200)
        h = rng.uniform(0, 0.5, size=200) * np.exp(2j * np.pi * rng.uniform(size=200))
        f, pz, pzb = p.derivatives(z)
        step = p.evaluate(z + h) - f
        assert np.all(np.abs(step) <= p.taylor_bound(np.abs(z), np.abs(h), 1) * (1 + 1e-12) + 1e-10)
        rest = step - pz * h - pzb * np.conj(h)
        assert np.all(np.abs(rest) <= p.taylor_bound(np.abs(z), np.abs(h), 2) * (1 + 1e-12) + 1e-10)

    def test_majorant(self):
        np.testing.assert_array_equal(SHARP_EXAMPLES["q3"].majorant, [0, 3, 3, 1])


class TestPolyFiles:
    def test_write_then_read(self):
        buf = io.StringIO()
        write_poly(SHARP_EXAMPLES["q4"], buf)
        assert read_poly(io.StringIO(buf.getvalue())) == SHARP_EXAMPLES["q4"]

    def test_imaginary_part_optional(self):
        doc = {"k": 2, "q": [{"i": 1, "j": 0, "re": 1}]}
        assert read_poly(io.StringIO(json.dumps(doc))) == SHARP_EXAMPLES["z2_conj"]

    @pytest.mark.parametrize(
        "text,message",
        [
            ("{oops", "malformed polynomial JSON"),
            ("[1, 2]", "must be an object"),
            ('{"q": []}', "malformed polynomial JSON"),
            ('{"k": 2, "q": [{"i": 0, "j": 0, "re": 1}, {"i": 0, "j": 0, "re": 2}]}', "duplicate"),
        ],
    )
    def test_malformed(self, text, message):
        with pytest.raises(ValueError, match=message):
            read_poly(io.StringIO(text))


class TestBounds:
    @pytest.mark.parametrize("k", [1, 2, 5])
    def test_root_count_bound(self, k):
        assert root_count_bound(k) == k * k

    def test_root_count_bound_invalid(self):
        with pytest.raises(ValueError):
            root_count_bound(0)

    def test_apriori_radius(self):
        assert apriori_radius(AnalyticPoly(3)) == 2.0
        assert apriori_radius(SHARP_EXAMPLES["q3"]) == 7.0

    @pytest.mark.parametrize(
        "name,radius", [("z2_conj", 1.0), ("q3", (3 + np.sqrt(21)) / 2)]
    )
    def test_search_radius_solves_the_cauchy_equation(self, name, radius):
        """z^2 - zbar: t^2 = t; q3: t^3 = 3t^2 + 3t"""
        assert search_radius(SHARP_EXAMPLES[name]) == pytest.approx(radius, rel=1e-12)

    def test_search_radius_of_a_monomial(self):
        assert search_radius(AnalyticPoly(3)) == 0.0

    @pytest.mark.parametrize("name", ["z2_conj", "q3", "q4"])
    def test_search_radius_holds_the_roots(self, name):
        p = SHARP_EXAMPLES[name]
        roots = find_roots(p)
        assert max(abs(z) for z in roots.roots) <= search_radius(p) * (1 + 1e-9)
        assert search_radius(p) <= apriori_radius(p)


class TestIsolation:
    def test_disk_around_zero_of_z_squared_minus_zbar(self):
        """sigma = 1 and the remainder is rho^2, so the disk has radius 1/2"""
        inner, outer = isolation_radii(SHARP_EXAMPLES["z2_conj"], [0.0], cap=10.0)
        assert inner[0] == 0.0
        assert outer[0] == pytest.approx(0.5, rel=1e-12)

    def test_disks_hold_no_other_root(self):
        p = SHARP_EXAMPLES["q3"]
        z = np.array(find_roots(p).roots)
        inner, outer = isolation_radii(p, z, cap=10.0)
        assert np.all(outer > inner)
        gaps = np.abs(z[:, None] - z[None, :]) + np.diag(np.full(z.size, np.inf))
        assert np.all(gaps.min(axis=1) >= outer)

    def test_singular_root_gets_no_disk(self):
        """p = z^2 at 0: p_z = p_zbar = 0"""
        _, outer = isolation_radii(AnalyticPoly(2), [0.0], cap=1.0)
        assert outer[0] == 0.0


class TestFindRoots:
    def test_z_squared_minus_zbar(self):
        """Zeros are 0 and the cube roots of unity"""
        p = SHARP_EXAMPLES["z2_conj"]
        roots = find_roots(p)
        expected = np.concatenate([[0.0], np.exp(2j * np.pi * np.arange(3) / 3)])
        assert roots.count == 4
        for z in expected:
            assert np.min(np.abs(np.array(roots.roots) - z)) < 1e-8
        assert roots.undecided_cells == 0
        assert roots.warnings == ()

    @pytest.mark.timeout(600)
    @pytest.mark.parametrize("name,count", [("z2_conj", 4), ("q3", 9), ("q5", 25)])
    def test_sharp_examples_attain_the_bound(self, name, count):
        p = SHARP_EXAMPLES[name]
        roots = find_roots(p)
        assert roots.count == count == root_count_bound(p.k)
        assert roots.undecided_cells == 0
        assert_valid_roots(p, roots)
        assert rank_audit(p, roots.roots) == count

    @pytest.mark.timeout(600)
    def test_q4_as_printed_has_eight_zeros(self):
        """z^4 + 3z^2 - z - 3zbar^3 - 3zbar^2 stays below the bound of 16"""
        p = SHARP_EXAMPLES["q4"]
        roots = find_roots(p)
        assert roots.count == 8 < root_count_bound(4)
        assert roots.undecided_cells == 0
        assert_valid_roots(p, roots)
        assert rank_audit(p, roots.roots) == 8

    @pytest.mark.parametrize("name", ["q3", "q5"])
    def test_real_coefficients_give_conjugate_pairs(self, name):
        """p(conj z) = conj p(z) when every coefficient is real"""
        z = np.array(find_roots(SHARP_EXAMPLES[name]).roots)
        for root in z:
            assert np.min(np.abs(z - np.conj(root))) < 1e-8

    def test_roots_are_sorted(self):
        z = find_roots(SHARP_EXAMPLES["q3"]).roots
        assert list(z) == sorted(z, key=lambda v: (v.real, v.imag))

    @pytest.mark.parametrize("k", [2, 3])
    def test_random_polynomials_respect_the_bound(self, rng, k):
        """Coefficients uniform in the unit disk"""
        for _ in range(5):
            coeffs = {
                (i, t - i): np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
                for t in range(k)
                for i in range(t + 1)
            }
            p = AnalyticPoly(k, coeffs)
            roots = find_roots(p, audit=False)
            assert roots.count <= root_count_bound(k)
            assert_valid_roots(p, roots)

    def test_surplus_is_reported_not_clamped(self):
        """Five accepted roots for k = 2 all come back, with a warning"""
        p = SHARP_EXAMPLES["z2_conj"]
        fake = np.array([0.0, 0.5, 1.0, -0.5 + 0.5j, -0.5 - 0.5j])
        distinct = (fake, np.full(5, 0.1), np.zeros(5))
        with patch("tchakaloff.backend.variety._distinct", return_value=distinct):
            roots = find_roots(p, tol=0.5, audit=False)
        assert roots.count == 5
        assert any("exceed the bound 4" in w for w in roots.warnings)

    def test_invalid_tol(self):
        with pytest.raises(ValueError, match="tol must be > 0"):
            find_roots(SHARP_EXAMPLES["z2_conj"], tol=0.0)

    def test_report_dict(self):
        doc = find_roots(SHARP_EXAMPLES["z2_conj"]).to_dict()
        assert doc["count"] == len(doc["roots"]) == len(doc["residuals"]) == 4
        assert doc["box_radius"] == 2.0
        assert doc["search_radius"] == pytest.approx(1.0)
        assert doc["undecided_cells"] == 0


class TestRankAudit:
    def test_empty(self):
        assert rank_audit(SHARP_EXAMPLES["z2_conj"], []) == 0

    def test_counts_distinct_points(self):
        p = AnalyticPoly(2)
        assert rank_audit(p, [0, 1, 1j]) == 3
