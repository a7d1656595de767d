from fractions import Fraction

import networkx as nx
import pytest

from relhyp.domain.cayley import Path, build_window, components, rel_geodesics
from relhyp.domain.constants import (
    GeodesicTriangle,
    check_lemma_lc,
    check_lemma_xi,
    clamp,
    conjugate_pairs,
    coset_incidence,
    count_x_ball,
    enumerate_cycles,
    enumerate_triangles,
    estimate_bcp_eps,
    estimate_constants,
    estimate_omega_L,
    estimate_thinness,
    isolated_ratio,
)
from relhyp.domain.errors import CapExceeded, NotOnSides
from relhyp.domain.group import IDENTITY


def _triangle(spec, window, y, z):
    g, h = spec.normal_form(y), spec.normal_form(z)
    return GeodesicTriangle(
        rel_geodesics(window, IDENTITY, g).paths[0],
        rel_geodesics(window, g, h).paths[0],
        rel_geodesics(window, IDENTITY, h).paths[0],
    )


class TestGeodesicTriangle:
    """Test triangle geometry helpers."""

    def test_gromov_products_add_up(self, f2):
        """Test that internal-point distances sum to the side lengths."""
        window = build_window(f2, 4, 4)
        tri = _triangle(f2, window, "a b a", "a b^-1 b^-1")

        assert tri.gromov("x") == 1
        assert tri.gromov("x") + tri.gromov("y") == len(tri.xy)
        assert tri.gromov("y") + tri.gromov("z") == len(tri.yz)

    def test_tree_triangles_are_tripods(self, f2):
        """Test that conjugate points coincide in a tree."""
        window = build_window(f2, 4, 4)
        tri = _triangle(f2, window, "a b a", "a b^-1 b^-1")

        pairs = conjugate_pairs(tri)

        assert pairs
        assert all(u == v for u, v in pairs)

    def test_internal_points(self, f2):
        """Test that internal points land on the center of a tripod."""
        window = build_window(f2, 4, 4)
        tri = _triangle(f2, window, "a b a", "a b^-1 b^-1")

        points = tri.internal_points()

        assert points["a"] == points["b"] == points["c"] == f2.normal_form("a")

    def test_check_uv_requires_side_points(self, f2):
        """Test that u and v must lie on the legs at x."""
        window = build_window(f2, 4, 4)
        tri = _triangle(f2, window, "a b a", "a b^-1 b^-1")

        assert tri.check_uv(IDENTITY, IDENTITY, window.d_rel)
        with pytest.raises(NotOnSides):
            tri.check_uv(f2.normal_form("b"), IDENTITY, window.d_rel)

    def test_check_uv_pairs_are_conjugate(self, zz):
        """Test that pairs accepted by check_uv away from x are conjugate pairs."""
        window = build_window(zz, 3, 3)

        for tri in enumerate_triangles(window, 2):
            pairs = conjugate_pairs(tri)
            for t in range(1, min(len(tri.xy), len(tri.xz)) + 1):
                u, v = tri.xy.vertices[t], tri.xz.vertices[t]
                if tri.check_uv(u, v, window.d_rel):
                    assert (u, v) in pairs


class TestThinness:
    """Test the thinness estimate."""

    def test_free_group_is_zero_thin(self, f2):
        """Test that triangles in F_2 have thinness 0."""
        window = build_window(f2, 3, 3)

        estimate = estimate_thinness(window, 3)

        assert estimate.value == 0
        assert estimate.instances > 0

    def test_free_product_is_one_thin(self, zz):
        """Test that the coned-off free product has thinness at most 1."""
        window = build_window(zz, 3, 3)

        assert estimate_thinness(window, 3).value <= 1

    def test_triangle_cap(self, f2):
        """Test the triangle cap."""
        window = build_window(f2, 2, 2)

        with pytest.raises(CapExceeded):
            estimate_thinness(window, 2, max_triangles=10)

    def test_monotone_in_window_radius(self, zz):
        """Test that growing the window never lowers the thinness estimate."""
        values = [estimate_thinness(build_window(zz, n, 3), n).value for n in (1, 2, 3)]

        assert values == sorted(values)

    @pytest.mark.slow
    def test_free_group_window_4(self, f2):
        """Test that F_2 stays 0-thin on the (4, 4) window."""
        window = build_window(f2, 4, 4)

        assert estimate_thinness(window, 4).value == 0


class TestIsolatedComponents:
    """Test cycle enumeration and the isolated-component ratio."""

    def test_free_product_has_no_isolated_components(self, zz):
        """Test that the coset incidence graph of Z*Z is a tree."""
        window = build_window(zz, 3, 3)

        estimate = estimate_omega_L(window, 4)

        assert estimate.value == 0
        assert estimate.instances == 0
        assert nx.is_forest(coset_incidence(window, 2))

    def test_free_group_has_no_cycles(self, f2):
        """Test that trees have no simple cycles."""
        window = build_window(f2, 3, 3)

        assert list(enumerate_cycles(window, 4)) == []

    def test_cycles_are_distinct_up_to_rotation(self, z2):
        """Test that each cycle class is reported once and closes at the identity."""
        window = build_window(z2, 2, 3)

        cycles = list(enumerate_cycles(window, 4))

        assert len(cycles) == 12
        assert all(c.is_closed and c.start == IDENTITY and len(c) == 4 for c in cycles)
        assert len({frozenset(c.vertices) for c in cycles}) == len(cycles)

    def test_coset_runs_are_single_edges(self, z2):
        """Test that a cycle enters each coset once, through one clique edge."""
        window = build_window(z2, 2, 4)

        cycles = list(enumerate_cycles(window, 5))

        assert all(len(c) == 1 for cycle in cycles for c in components(cycle, cyclic=True))
        assert all(len(cycle) == 4 for cycle in cycles)
        assert frozenset(Path.from_word(z2, "a^2 b a^-2 b^-1").vertices) in {frozenset(c.vertices) for c in cycles}

    def test_abelian_ratio_grows_with_window(self, z2):
        """Test that the Z^2 ratio is (rho_X - 1) / 2 for rho_X = 5 and 7."""
        small = estimate_omega_L(build_window(z2, 2, 5), 4)
        large = estimate_omega_L(build_window(z2, 2, 7), 4)

        assert small.value == 2
        assert large.value == 3
        assert large.witnesses

    def test_isolated_ratio_of_rectangle(self, z2):
        """Test the ratio of the rectangle a^3 b a^-3 b^-1."""
        window = build_window(z2, 2, 4)
        cycle = Path.from_word(z2, "a^3 b a^-3 b^-1")

        assert isolated_ratio(window, cycle) == Fraction(6, 4)

    def test_cycle_cap(self, z2):
        """Test the cap on the number of simple cycles examined."""
        window = build_window(z2, 2, 4)

        with pytest.raises(CapExceeded):
            list(enumerate_cycles(window, 4, max_cycles=3))

    @pytest.mark.slow
    def test_free_product_window_8(self, zz):
        """Test that Z*Z keeps L_hat = 0 on the (8, 8) window."""
        window = build_window(zz, 8, 8)

        assert estimate_omega_L(window, 4).value == 0

    @pytest.mark.slow
    @pytest.mark.parametrize("m", range(1, 9))
    def test_rectangle_ratio_is_half_the_side(self, z2, m):
        """Test that the rectangle with an a-side of length m has ratio m/2."""
        window = build_window(z2, 2, 9)
        cycle = Path.from_word(z2, f"a^{m} b a^-{m} b^-1")

        assert isolated_ratio(window, cycle) == Fraction(m, 2)


class TestBoundedCosetPenetration:
    """Test the connected-components estimate and check."""

    def test_free_product_scale_zero(self, zz):
        """Test that unique geodesics need no slack at s = 0."""
        window = build_window(zz, 2, 3)

        estimate = estimate_bcp_eps(window, 0)

        assert estimate.value == 0
        assert estimate.instances > 0

    def test_free_group_has_no_components(self, f2):
        """Test that F_2 never fails the connectivity test."""
        window = build_window(f2, 2, 2)

        assert estimate_bcp_eps(window, 1).value == 0

    def test_check_on_free_product(self, zz):
        """Test that Z*Z has no violations at s = 0."""
        window = build_window(zz, 2, 3)

        report = check_lemma_lc(window, 0, 1 / 6, 0)

        assert report.passed

    def test_check_fails_on_abelian(self, z2):
        """Test that parallel rows of Z^2 violate the connectivity check."""
        window = build_window(z2, 2, 6)

        report = check_lemma_lc(window, 1, 1.0, 0.0)

        assert not report.passed
        assert report.instances > 0
        assert report.parameters["threshold"] == 4


class TestConjugatePointsCheck:
    """Test the X-closeness check for conjugate points."""

    def test_free_group(self, f2):
        """Test that F_2 has no violations with the clamped constants."""
        window = build_window(f2, 3, 3)

        report = check_lemma_xi(window, 1 / 6, 1.0)

        assert report.passed
        assert report.parameters["sigma"] == 5

    def test_free_product(self, zz):
        """Test that Z*Z has no violations with the clamped constants."""
        window = build_window(zz, 3, 3)

        assert check_lemma_xi(window, 1 / 6, 1.0).passed

    @pytest.mark.slow
    def test_free_product_with_estimated_constants(self, zz):
        """Test Z*Z on the (6, 6) window against constants estimated on a smaller one."""
        thin = estimate_thinness(build_window(zz, 3, 3), 3)
        L, xi = clamp(Fraction(0), thin.value)  # noqa: N806

        report = check_lemma_xi(build_window(zz, 6, 6), float(L), float(xi))

        assert report.passed
        assert report.instances > 0


class TestClamp:
    """Test the clamp rule and derived constants."""

    def test_zero_estimates(self):
        """Test that L = 1/6 and xi = 1 when nothing was observed."""
        assert clamp(Fraction(0), Fraction(0)) == (Fraction(1, 6), Fraction(1))

    def test_positive_estimates(self):
        """Test that large estimates pass through."""
        assert clamp(Fraction(3), Fraction(1)) == (Fraction(3), Fraction(1))

    def test_xi_lifted(self):
        """Test that xi is lifted to 1/(6L)."""
        assert clamp(Fraction(1, 12), Fraction(1)) == (Fraction(1, 12), Fraction(2))

    @pytest.mark.parametrize("l_hat,xi_hat", [(0, 0), (1, 0), (Fraction(1, 3), 2), (5, 7)])
    def test_invariant(self, l_hat, xi_hat):
        """Test L > 0 and 6 L xi >= 1."""
        L, xi = clamp(Fraction(l_hat), Fraction(xi_hat))  # noqa: N806

        assert L > 0
        assert 6 * L * xi >= 1

    def test_count_x_ball(self, f2):
        """Test mu as the X-ball size and its cap."""
        window = build_window(f2, 1, 1)

        assert count_x_ball(window, 1) == 5
        assert count_x_ball(window, 3, max_count=10) is None


class TestEstimateConstants:
    """Test the full constants report."""

    def test_free_group(self, f2):
        """Test F_2: xi_hat = 0, L_hat = 0, clamped to rho = 1 and mu = 5."""
        window = build_window(f2, 3, 3)

        report = estimate_constants(window, scales=(0,))

        assert report.xi_hat == 0
        assert report.L_hat == 0
        assert (report.L, report.xi, report.sigma, report.rho) == (pytest.approx(1 / 6), 1, 5, pytest.approx(1))
        assert report.mu == 5
        assert report.eps == {0: 0}
        assert not report.diverging

    def test_free_product(self, zz):
        """Test Z*Z: bounded constants and no divergence."""
        window = build_window(zz, 3, 3)
        control = build_window(zz, 3, 2)

        report = estimate_constants(window, cycle_len_cap=3, scales=(0,), control=control)

        assert report.xi_hat <= 1
        assert report.L_hat == 0
        assert report.mu == 5
        assert not report.diverging

    def test_abelian_diverges(self, z2):
        """Test that Z^2 is flagged as diverging between two windows."""
        window = build_window(z2, 2, 5)
        control = build_window(z2, 2, 3)

        report = estimate_constants(window, side_cap=1, scales=(0,), control=control)

        assert report.L_hat == 2
        assert report.diverging
        assert "not relatively hyperbolic" in report.verdict

    def test_default_control_window(self, z2):
        """Test that the control window is built two X-steps smaller by default."""
        window = build_window(z2, 2, 5)

        report = estimate_constants(window, side_cap=1, scales=(0,))

        assert report.control_rho_x == 3
        assert report.control_L_hat == 1
        assert report.divergence_threshold == 2
        assert report.diverging
        assert "m > 2L = 2.0" in report.verdict

    def test_control_disabled(self, z2):
        """Test that no control gap means no divergence check."""
        window = build_window(z2, 2, 5)

        report = estimate_constants(window, side_cap=1, scales=(0,), control_gap=None)

        assert report.control_rho_x is None
        assert report.divergence_threshold is None
        assert not report.diverging

    def test_control_needs_room(self, f2):
        """Test that a window with rho_X <= 2 has no default control."""
        window = build_window(f2, 2, 2)

        report = estimate_constants(window, scales=(0,))

        assert report.control_rho_x is None
