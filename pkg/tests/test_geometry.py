import math

import numpy as np
import pytest
from scipy.integrate import quad

from fastfrac.errors import ConfigurationError, DomainError
from fastfrac.geometry import (
    ManifoldModel,
    RadialGrid,
    build_radial_grid,
    heat_kernel,
    heat_kernel_gaussian_bound,
)

E3 = ManifoldModel("euclidean", 3)
H2 = ManifoldModel("hyperbolic", 2, 1.0)
H3 = ManifoldModel("hyperbolic", 3, 1.0)
H4 = ManifoldModel("hyperbolic", 4, 1.0)
H5 = ManifoldModel("hyperbolic", 5, 1.0)


class TestModelFlags:
    def test_assumption_flags(self):
        assert E3.faber_krahn and E3.cartan_hadamard
        assert not E3.strictly_negative_curvature
        assert H3.faber_krahn and H3.cartan_hadamard and H3.strictly_negative_curvature

    def test_ricci_bound(self):
        assert E3.ricci_lower_bound == 0.0
        assert ManifoldModel("hyperbolic", 3, 2.0).ricci_lower_bound == 4.0

    def test_rejects_bad_dimension(self):
        with pytest.raises(ConfigurationError):
            ManifoldModel("euclidean", 1)

    def test_rejects_bad_kind(self):
        with pytest.raises(ConfigurationError):
            ManifoldModel("spherical", 3)


class TestHeatKernel:
    def test_euclidean_origin_value(self):
        # direct evaluation of (4 pi t)^(-3/2) at t=1, r=0
        assert heat_kernel(E3, 1.0, 0.0) == pytest.approx((4 * math.pi) ** -1.5, rel=1e-14)
        assert heat_kernel(E3, 1.0, 0.0) == pytest.approx(0.02244839026564582, rel=1e-12)

    def test_h3_closed_form_value(self):
        expected = (4 * math.pi) ** -1.5 / math.sinh(1.0) * math.exp(-1.0 - 0.25)
        assert heat_kernel(H3, 1.0, 1.0) == pytest.approx(expected, rel=1e-13)

    def test_rejects_nonpositive_time(self):
        with pytest.raises(DomainError):
            heat_kernel(E3, 0.0, 1.0)
        with pytest.raises(DomainError):
            heat_kernel(H3, -1.0, 1.0)

    @pytest.mark.parametrize("model", [E3, H2, H3, H4, H5], ids=lambda m: f"{m.kind}{m.dimension}")
    @pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
    def test_conservation(self, model, t):
        # stochastic completeness: the kernel integrates to 1 over the manifold
        def integrand(r):
            return (heat_kernel(model, t, np.array([r]))[0] * model.surface_area(r)).item()

        hi = math.sqrt(240.0 * t) + (model.dimension - 1) * t + 5.0
        mass, _ = quad(integrand, 0.0, hi, limit=400)
        assert mass == pytest.approx(1.0, abs=5e-9)

    @pytest.mark.parametrize("model", [E3, H2, H3, H4], ids=lambda m: f"{m.kind}{m.dimension}")
    def test_decreasing_in_r(self, model):
        r = np.linspace(0.0, 6.0, 40)
        for t in (0.2, 1.0, 5.0):
            k = heat_kernel(model, t, r)
            assert np.all(np.diff(k) < 0)

    @pytest.mark.parametrize("model", [E3, H2, H3, H4, H5], ids=lambda m: f"{m.kind}{m.dimension}")
    def test_gaussian_upper_bound(self, model):
        c1, c2 = heat_kernel_gaussian_bound(model)
        assert np.isfinite(c1) and c1 > 0
        # the fitted envelope must dominate on a fresh sample set
        for t in (0.07, 0.7, 7.0):
            r = np.linspace(0.0, 7.0, 29)
            k = heat_kernel(model, t, r)
            bound = c1 * t ** (-model.dimension / 2.0) * np.exp(-c2 * r**2 / t)
            assert np.all(k <= bound * (1 + 1e-12))

    def test_curvature_scaling(self):
        # k_a(t, r) = a^N k_1(a^2 t, a r)
        a = 1.7
        ha = ManifoldModel("hyperbolic", 3, a)
        got = heat_kernel(ha, 0.8, 1.3)
        expected = a**3 * heat_kernel(H3, a**2 * 0.8, a * 1.3)
        assert got == pytest.approx(float(expected), rel=1e-13)

    def test_even_dimension_cross_check_h4(self):
        # independent route: ascend from the closed-form H^3 kernel by one
        # dimension,  k_4(t,r) = -(sqrt2/2pi) e^{-5t/4}
        #                        int_r^inf d_s k_3(t,s) / sqrt(cosh s - cosh r) ds
        t, r = 0.7, 1.1

        def dk3(s):
            pref = (4 * math.pi * t) ** -1.5 * math.exp(-t)
            g = s / math.sinh(s) * math.exp(-(s**2) / (4 * t))
            dg = (
                (1.0 / math.sinh(s))
                - s * math.cosh(s) / math.sinh(s) ** 2
                - s**2 / (2 * t * math.sinh(s))
            ) * math.exp(-(s**2) / (4 * t))
            assert abs(g) >= 0  # silence lint
            return pref * dg

        def integrand(w):
            s = math.acosh(math.cosh(r) + w * w)
            return 2.0 * dk3(s) / math.sinh(s)

        val, _ = quad(integrand, 0.0, math.sqrt(math.cosh(9.0) - math.cosh(r)), limit=300)
        expected = -math.sqrt(2.0) / (2 * math.pi) * math.exp(-5 * t / 4.0) * val
        got = heat_kernel(H4, t, np.array([r]))[0]
        assert got == pytest.approx(expected, rel=1e-9)

    def test_semigroup_property_on_ray(self):
        # k(t1+t2, d(x,o)) = int k(t1, d(x,y)) k(t2, d(y,o)) dmu(y) for radial y
        # (checked via 2D quadrature in (radius, angle) on H^3)
        t1, t2, r0 = 0.4, 0.6, 0.8
        from numpy.polynomial.legendre import leggauss

        xs, ws = leggauss(80)
        rho = 4.0 * (xs + 1.0) / 2.0
        wr = ws * 2.0
        cs, wc = leggauss(60)
        total = 0.0
        for i, rr in enumerate(rho):
            d = H3.pair_distance(r0, rr, cs)
            inner = np.sum(wc * heat_kernel(H3, t1, d)) / 2.0
            total += wr[i] * float(H3.surface_area(rr)) * inner * heat_kernel(H3, t2, rr).item()
        expected = heat_kernel(H3, t1 + t2, r0).item()
        assert total == pytest.approx(expected, rel=2e-6)


class TestPairDistance:
    def test_euclidean_law_of_cosines(self):
        d = E3.pair_distance(1.0, 2.0, math.cos(0.7))
        expected = math.sqrt(1 + 4 - 2 * 1 * 2 * math.cos(0.7))
        assert d == pytest.approx(expected, rel=1e-14)

    def test_hyperbolic_triangle(self):
        d = H3.pair_distance(1.0, 2.0, math.cos(0.7))
        expected = math.acosh(
            math.cosh(1) * math.cosh(2) - math.sinh(1) * math.sinh(2) * math.cos(0.7)
        )
        assert d == pytest.approx(expected, rel=1e-13)

    @pytest.mark.parametrize("model", [E3, H3])
    def test_degenerate_angles(self, model):
        assert model.pair_distance(1.3, 1.3, 1.0) == pytest.approx(0.0, abs=1e-12)
        assert model.pair_distance(1.0, 2.0, 1.0) == pytest.approx(1.0, rel=1e-12)
        assert model.pair_distance(1.0, 2.0, -1.0) == pytest.approx(3.0, rel=1e-12)

    def test_near_diagonal_stability(self):
        # tiny separations must not collapse to zero through cancellation
        cphi = math.cos(1e-6)
        d = float(H3.pair_distance(2.0, 2.0 + 1e-6, cphi))
        expected = math.sqrt(1e-12 + 2.0 * math.sinh(2.0) ** 2 * (1.0 - cphi))
        assert d == pytest.approx(expected, rel=1e-6)


class TestRadialGrid:
    def test_euclidean_total_volume(self):
        g = build_radial_grid(E3, 1.0, 64, 2.0)
        assert g.weights.sum() == pytest.approx(4 * math.pi / 3, abs=1e-12)

    def test_hyperbolic_total_volume(self):
        # int_0^1 4 pi sinh^2 r dr = pi (sinh 2 - 2)
        g = build_radial_grid(H3, 1.0, 64, 2.0)
        assert g.weights.sum() == pytest.approx(math.pi * (math.sinh(2.0) - 2.0), abs=1e-12)

    def test_partition_invariance_under_stretch(self):
        g1 = build_radial_grid(H3, 1.0, 64, 1.0)
        g2 = build_radial_grid(H3, 1.0, 64, 2.0)
        assert g1.weights.sum() == pytest.approx(g2.weights.sum(), abs=1e-13)

    def test_nodes_increasing_weights_positive(self):
        for model in (E3, H3):
            g = build_radial_grid(model, 10.0, 256, 2.0)
            assert np.all(np.diff(g.nodes) > 0)
            assert np.all(g.weights > 0)

    def test_interior_ball_volumes(self):
        g = build_radial_grid(E3, 10.0, 128, 2.0)
        for idx in (10, 50, 100):
            rb = g.boundaries[idx]
            assert g.ball_weight_sum(rb) == pytest.approx(float(E3.ball_volume(rb)), abs=1e-11)

    def test_rejects_small_grid(self):
        with pytest.raises(ConfigurationError):
            build_radial_grid(E3, 1.0, 8)

    def test_integrate_indicator(self):
        g = build_radial_grid(E3, 2.0, 128, 1.0)
        u = (g.nodes <= 1.0).astype(float)
        # piecewise-constant integral equals the volume covered by those cells
        covered = g.ball_weight_sum(g.boundaries[np.searchsorted(g.nodes, 1.0, "right")])
        assert g.integrate(u) == pytest.approx(covered, rel=1e-12)
