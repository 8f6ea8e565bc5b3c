import math

import numpy as np
import pytest

from fdlab import (FitUnstable, FlowParams, RadialField, SolverConfig,
                   arc_length_profile, build_grid, completeness_indicator,
                   cone_slope_squared, conical_order, euclidean_order,
                   fit_end_asymptotics, flow_time_from_pde, geometry_profile,
                   initial_profile, pde_time_from_flow, scalar_curvature,
                   solve, sphere_volume, volume_form_limits, warping_profile,
                   yamabe_constant_sphere, yamabe_flow_residual)
from fdlab.geometry import (arc_length_from_callable, conical_shift_reference,
                            euclidean_shift_reference)
from fdlab.solver import Trajectory


def u0_field(p, grid, t=0.0):
    return RadialField(grid, initial_profile(p, grid.nodes), time=t)


@pytest.fixture(scope="module")
def geo_profile(geo_params):
    """Quadrature-grade initial-slice profile on a fine grid."""
    grid = build_grid(1e-4, 1e3, 24577)
    field = u0_field(geo_params, grid)
    rho = arc_length_from_callable(
        lambda r: initial_profile(geo_params, r), grid, geo_params.n)
    return geometry_profile(field, geo_params, rho=rho)


class TestTimeRescale:
    def test_zero_maps_to_zero(self):
        assert flow_time_from_pde(0.0, 5) == 0.0
        assert pde_time_from_flow(0.0, 5) == 0.0

    @pytest.mark.parametrize("n", [3, 6])
    def test_slope_is_one_tenth(self, n):
        # (n-2)/((n-1)(n+2)) equals 1/10 for both n=3 and n=6
        assert flow_time_from_pde(1.0, n) == pytest.approx(0.1, rel=1e-15)

    def test_round_trip(self):
        t = np.linspace(0, 7, 11)
        np.testing.assert_allclose(pde_time_from_flow(
            flow_time_from_pde(t, 5), 5), t, rtol=1e-14)


class TestReferenceExponents:
    def test_cone_data_for_flat_critical_case(self):
        assert cone_slope_squared(6, 6.0) == pytest.approx(0.25)
        assert conical_order(6, 6.0) == pytest.approx(4.0)
        assert euclidean_order(6, 6.0) == pytest.approx(1.0)

    def test_cone_slope_window(self):
        # B in (0,1) across the admissible range
        for lam in np.linspace(4.01, 7.99, 15):
            assert 0.0 < cone_slope_squared(6, lam) < 1.0

    def test_order_sign_flips_below_dimension_six(self):
        # the printed closed form turns negative for n=3, lam=4
        assert conical_order(3, 4.0) < 0.0


class TestArcLength:
    def test_unit_field(self):
        g = build_grid(0.25, 4.0, 129)
        rho = arc_length_profile(RadialField(g, np.ones(g.size)), n=6)
        np.testing.assert_allclose(rho, g.nodes - 1.0, atol=1e-12)

    def test_constant_field(self):
        g = build_grid(0.25, 4.0, 129)
        c = 2.7
        rho = arc_length_profile(RadialField(g, np.full(g.size, c)), n=6)
        np.testing.assert_allclose(rho, c ** 0.25 * (g.nodes - 1.0),
                                   rtol=1e-10)

    def test_power_law_against_antiderivative(self):
        # u = c1 r^-lam: rho = c1^p (r^(1-p lam) - 1)/(1 - p lam),
        # p = 2/(n+2)
        n, lam, c1 = 6, 6.0, 1.7
        g = build_grid(1e-3, 1e3, 8193)
        u = c1 * g.nodes ** -lam
        rho = arc_length_profile(RadialField(g, u), n=n)
        pw = 2.0 / (n + 2.0)
        expo = 1.0 - pw * lam
        exact = c1 ** pw * (g.nodes ** expo - 1.0) / expo
        np.testing.assert_allclose(rho, exact, rtol=2e-6, atol=1e-9)

    def test_zero_at_unit_node(self, geo_params):
        g = build_grid(1e-2, 1e2, 257)
        rho = arc_length_profile(u0_field(geo_params, g), geo_params.n)
        assert rho[g.index_of_unit] == 0.0
        assert np.all(np.diff(rho) > 0)


class TestCompleteness:
    def test_singular_profile_is_complete_both_ends(self, geo_params):
        g = build_grid(1e-4, 1e3, 2049)
        report = completeness_indicator(u0_field(geo_params, g), geo_params)
        assert report["inner"]["complete"]
        assert report["outer"]["complete"]
        # inner integrand exponent -2 lam/(n+2) = -1.5
        assert report["inner"]["exponent"] == pytest.approx(-1.5, abs=1e-3)
        assert report["outer"]["exponent"] == pytest.approx(0.0, abs=1e-3)
        assert report["inner"]["truncated_length"] < 0

    def test_constant_limit_field_is_inner_incomplete(self, geo_params):
        g = build_grid(1e-4, 1e3, 2049)
        c2 = geo_params.c2
        field = RadialField(g, np.full(g.size, c2))
        report = completeness_indicator(field, geo_params)
        assert not report["inner"]["complete"]
        assert report["outer"]["complete"]

    def test_threshold_exponent_is_flagged(self, geo_params):
        # u = r^(-(n+2)/2) makes the integrand exactly r^-1
        g = build_grid(1e-4, 1e3, 2049)
        field = RadialField(g, g.nodes ** (-(geo_params.n + 2.0) / 2.0))
        report = completeness_indicator(field, geo_params)
        assert report["inner"]["borderline"]

    def test_unstable_fit_raises(self, geo_params):
        g = build_grid(1e-4, 1e3, 2049)
        values = np.where(g.nodes < 3e-4, g.nodes ** -8.0, g.nodes ** -2.0)
        with pytest.raises(FitUnstable):
            completeness_indicator(RadialField(g, values + 1.0), geo_params)


class TestWarping:
    def test_flat_space(self, geo_params):
        g = build_grid(1e-2, 1e2, 513)
        field = RadialField(g, np.ones(g.size))
        rho_t, F = warping_profile(field, geo_params, shift=1.0)
        np.testing.assert_allclose(F, rho_t ** 2, rtol=1e-10)
        assert np.all(F > 0)

    def test_pure_power_cone_slope(self):
        # sqrt(F)/|rho| -> |2 lam/(n+2) - 1| toward the puncture; the
        # arc-length base constant decays like 1/rho along the way
        n, lam = 6, 6.0
        p = FlowParams(n=n, m=0.5, lam=lam, c1=1.0, c2=1.0)
        g = build_grid(1e-8, 10.0, 8193)
        field = RadialField(g, g.nodes ** -lam)
        rho_t, F = warping_profile(field, p, shift=0.0)
        ratio = np.sqrt(F[:40]) / np.abs(rho_t[:40])
        assert np.allclose(ratio, abs(2 * lam / (n + 2) - 1), rtol=1e-3)


class TestEndFits:
    def test_inner_cone_fit(self, geo_params, geo_profile):
        fit = fit_end_asymptotics(geo_profile, "E2", geo_params)
        assert fit.fitted_slope == pytest.approx(0.5, rel=1e-4)
        assert fit.fitted_order == pytest.approx(4.0, rel=0.02)
        assert not fit.sign_disagreement
        assert fit.ref_slope == 0.5 and fit.ref_order == pytest.approx(4.0)

    def test_outer_euclidean_fit(self, geo_params, geo_profile):
        fit = fit_end_asymptotics(geo_profile, "E1", geo_params)
        assert fit.fitted_slope == 1.0
        assert fit.fitted_order == pytest.approx(1.0, rel=0.02)

    def test_shifts_match_quadrature_references(self, geo_params,
                                                geo_profile):
        r1 = euclidean_shift_reference(geo_params)
        r2 = conical_shift_reference(geo_params)
        fit1 = fit_end_asymptotics(geo_profile, "E1", geo_params)
        fit2 = fit_end_asymptotics(geo_profile, "E2", geo_params)
        assert fit1.shift == pytest.approx(r1, abs=1e-5)
        assert fit2.shift == pytest.approx(r2, abs=1e-5)

    def test_requires_enough_nodes(self, geo_params):
        g = build_grid(1e-4, 1e3, 65)
        prof = geometry_profile(u0_field(geo_params, g), geo_params)
        with pytest.raises(FitUnstable):
            fit_end_asymptotics(prof, "E2", geo_params)

    def test_noncritical_exponent_rejected(self, geo_profile):
        p = FlowParams(n=5, m=0.4, lam=4.0, c1=1.0, c2=1.0)
        with pytest.raises(Exception, match="critical"):
            fit_end_asymptotics(geo_profile, "E2", p)


class TestScalarCurvature:
    def test_constant_field_is_scalar_flat(self, geo_params):
        g = build_grid(1e-2, 1e2, 513)
        field = RadialField(g, np.full(g.size, 4.2))
        scal = scalar_curvature(field, geo_params)
        np.testing.assert_allclose(scal, 0.0, atol=1e-12)

    def test_matches_closed_form_at_time_zero(self, geo_params):
        # -(4(n-1)/(n-2)) v^(-(n+2)/(n-2)) c1^mc (mc lam)^2 r^(-mc lam-2)
        p = geo_params
        g = build_grid(1e-4, 1e3, 2049)
        scal = scalar_curvature(u0_field(p, g), p)
        ri = g.nodes[1:-1]
        v = p.c1 ** p.m * ri ** (-p.m * p.lam) + p.c2 ** p.m
        k = p.m * p.lam
        exact = (-4.0 * (p.n - 1) / (p.n - 2) * v ** (-(p.n + 2) / (p.n - 2))
                 * p.c1 ** p.m * k ** 2 * ri ** (-k - 2.0))
        win = ri <= 1.0
        np.testing.assert_allclose(scal[win], exact[win], rtol=1e-4)
        assert np.all(scal < 0)

    def test_grid_convergence_order(self, geo_params):
        # N = 512 splits the 4:3 decade proportion exactly, so the mesh
        # ratio is a single constant at every refinement level (an
        # uneven split leaves one first-order node where the two
        # geometric pieces meet)
        p = geo_params
        g = build_grid(1e-4, 1e3, 512)
        errs = []
        for _ in range(3):
            scal = scalar_curvature(u0_field(p, g), p)
            ri = g.nodes[1:-1]
            v = p.c1 ** p.m * ri ** (-p.m * p.lam) + p.c2 ** p.m
            k = p.m * p.lam
            exact = (-4.0 * (p.n - 1) / (p.n - 2)
                     * v ** (-(p.n + 2) / (p.n - 2))
                     * p.c1 ** p.m * k ** 2 * ri ** (-k - 2.0))
            win = ri <= 1.0
            errs.append(np.max(np.abs(scal[win] - exact[win])
                               / np.abs(exact[win])))
            g = g.refine()
        order1 = math.log2(errs[0] / errs[1])
        order2 = math.log2(errs[1] / errs[2])
        assert order1 >= 1.8 and order2 >= 1.8


class TestFlowResidual:
    def test_constant_trajectory_has_zero_residual(self, geo_params):
        g = build_grid(1e-2, 1e2, 65)
        p = FlowParams(n=6, m=0.5, lam=6.0, c1=0.0, c2=1.0)
        tr = solve(p, g, SolverConfig(dt0=1e-2, t_end=0.3),
                   out_times=[0.1, 0.2])
        rows = yamabe_flow_residual(tr)
        assert all(metric == 0.0 for _, metric in rows)

    def test_frozen_initial_data_shows_its_defect(self, geo_params):
        # feeding the time-independent upper profile as a fake
        # trajectory leaves exactly the diffusion term, whose size is
        # c1^mc mc lam (n-2-mc lam) r^(-mc lam-2) at the initial slice
        p = geo_params
        g = build_grid(1e-2, 1e2, 2049)
        fields = [u0_field(p, g, t) for t in (0.0, 0.1, 0.2)]
        tr = Trajectory(p, g, [0.0, 0.1, 0.2], fields, "pinned-initial")
        rows = yamabe_flow_residual(tr)
        ri = g.nodes[1:-1]
        k = p.m * p.lam
        defect = (p.c1 ** p.m * k * (p.n - 2 - k) * ri ** (-k - 2.0)
                  / initial_profile(p, ri))
        assert rows[0][1] == pytest.approx(np.max(defect), rel=1e-3)

    def test_needs_three_times(self, geo_params):
        g = build_grid(1e-2, 1e2, 65)
        fields = [u0_field(geo_params, g, t) for t in (0.0, 0.1)]
        tr = Trajectory(geo_params, g, [0.0, 0.1], fields, "pinned-initial")
        with pytest.raises(ValueError):
            yamabe_flow_residual(tr)


class TestVolumeAndYamabe:
    def test_volume_limits_of_initial_data(self, geo_params):
        g = build_grid(1e-4, 1e3, 2049)
        v_in, v_out = volume_form_limits(u0_field(geo_params, g), geo_params)
        expo = 2.0 * geo_params.n / (geo_params.n + 2.0)
        assert v_in == pytest.approx(geo_params.c1 ** expo, rel=1e-6)
        assert v_out == pytest.approx(geo_params.c2 ** expo, rel=1e-6)

    def test_unequal_amplitudes(self):
        p = FlowParams(n=6, m=0.5, lam=6.0, c1=2.0, c2=0.5)
        g = build_grid(1e-4, 1e3, 2049)
        v_in, v_out = volume_form_limits(u0_field(p, g), p)
        expo = 2.0 * p.n / (p.n + 2.0)
        assert v_in == pytest.approx(2.0 ** expo, rel=1e-4)
        assert v_out == pytest.approx(0.5 ** expo, rel=1e-4)

    def test_sphere_volumes(self):
        assert sphere_volume(3) == pytest.approx(2.0 * math.pi ** 2,
                                                 rel=1e-15)
        assert sphere_volume(4) == pytest.approx(8.0 * math.pi ** 2 / 3.0,
                                                 rel=1e-15)

    def test_yamabe_constants(self):
        y3 = yamabe_constant_sphere(3)
        assert y3 == pytest.approx(6.0 * (2 * math.pi ** 2) ** (2.0 / 3.0),
                                   rel=1e-14)
        assert abs(y3 - 43.83) <= 0.01
        assert yamabe_constant_sphere(4) == pytest.approx(61.56, abs=5e-3)

    @pytest.mark.parametrize("n", range(3, 12))
    def test_yamabe_positive(self, n):
        assert yamabe_constant_sphere(n) > 0.0

    def test_volume_density_nonincreasing_in_time(self, geo_params):
        # pointwise consequence of the solution's time monotonicity
        g = build_grid(1e-3, 1e3, 257)
        tr = solve(geo_params, g, SolverConfig(dt0=1e-3, t_end=0.5),
                   check_sandwich=False)
        expo = 2.0 * geo_params.n / (geo_params.n + 2.0)
        prev = tr.fields[0].values ** expo
        for f in tr.fields[1:]:
            dens = f.values ** expo
            assert np.all(dens <= prev * (1 + 1e-10))
            prev = dens
