import numpy as np
import pytest

from fdlab import (FlowParams, NewtonDivergence, RadialField,
                   RegularizationConfig, SolverConfig, build_ball_grid,
                   build_grid, export_trajectory, import_trajectory,
                   initial_profile, regularized_initial, solve,
                   solve_regularized, steady_profile, steady_state_reference,
                   step, verify_theorem_clauses)
from fdlab.solver import clause_windows


def _discrete_steady(p, grid):
    """u with u^m in the exact kernel of the discrete radial operator,
    matching the pinned boundary values; tridiagonal solve."""
    from scipy.linalg import solve_banded

    from fdlab.grid import RadialOperator
    op = RadialOperator(grid, p.n)
    phi0 = initial_profile(p, grid.nodes) ** p.m
    nn = grid.size - 2
    ab = np.zeros((3, nn))
    ab[1, :] = op.di
    ab[0, 1:] = op.up[:-1]
    ab[2, :-1] = op.lo[1:]
    rhs = np.zeros(nn)
    rhs[0] -= op.lo[0] * phi0[0]
    rhs[-1] -= op.up[-1] * phi0[-1]
    phi = np.concatenate([[phi0[0]], solve_banded((1, 1), ab, rhs),
                          [phi0[-1]]])
    return phi ** (1.0 / p.m)


@pytest.fixture(scope="module")
def small_grid():
    return build_grid(1e-2, 1e2, 256)


@pytest.fixture(scope="module")
def short_run(ref_params):
    # full six-decade domain: the profile clauses are meaningful only
    # when the inner window sits deep inside the power-law regime
    cfg = SolverConfig(dt0=1e-4, t_end=0.5)
    return solve(ref_params, build_grid(1e-3, 1e3, 384), cfg)


class TestSingleStep:
    def test_constant_field_is_stationary(self, ref_params, small_grid):
        cfg = SolverConfig(dt0=1e-3, t_end=1.0)
        u = RadialField(small_grid, np.full(small_grid.size, 3.7))
        out = step(u, 0.25, cfg, ref_params)
        np.testing.assert_array_equal(out.values, u.values)

    def test_discrete_steady_state_is_fixed(self, ref_params, small_grid):
        # the discretely harmonic profile (kernel of the tridiagonal
        # operator, computed by an independent linear solve) is a fixed
        # point of the implicit step up to the Newton tolerance
        p = ref_params
        w = _discrete_steady(p, small_grid)
        cfg = SolverConfig(dt0=1e-3, t_end=1.0, newton_tol=1e-12)
        out = step(RadialField(small_grid, w), 0.05, cfg, p)
        np.testing.assert_allclose(out.values, w, rtol=1e-9)

    def test_discrete_steady_state_approaches_harmonic_oracle(
            self, ref_params):
        # the same object converges to alpha + beta r^(2-n) in the
        # closed form under refinement
        p = ref_params
        grid = build_grid(1e-2, 1e2, 256)
        errs = []
        for _ in range(3):
            alpha, beta = steady_state_reference(p, grid)
            w_exact = steady_profile(p, alpha, beta, grid.nodes)
            w_h = _discrete_steady(p, grid)
            errs.append(np.max(np.abs(w_h - w_exact) / w_exact))
            grid = grid.refine()
        assert errs[0] / errs[1] > 3.0 and errs[1] / errs[2] > 3.0

    def test_one_step_decreases_from_initial_data(self, ref_params,
                                                  small_grid):
        p = ref_params
        u = RadialField(small_grid, initial_profile(p, small_grid.nodes))
        out = step(u, 1e-3, SolverConfig(dt0=1e-3, t_end=1.0), p)
        assert np.all(out.values <= u.values * (1.0 + 1e-10))

    def test_trapezoidal_weighting(self, ref_params, small_grid):
        # theta = 1/2 stays consistent with the damped default over a
        # short horizon and is more accurate against a fine reference
        p = ref_params
        fine = solve(p, small_grid,
                     SolverConfig(dt0=1e-4, t_end=0.05, step_growth=1.0,
                                  dt_cap=1e-4), check_sandwich=False)
        ref = fine.fields[-1].values
        errs = {}
        for theta in (1.0, 0.5):
            cfg = SolverConfig(dt0=5e-3, t_end=0.05, theta=theta,
                               step_growth=1.0, dt_cap=5e-3)
            tr = solve(p, small_grid, cfg, check_sandwich=False)
            errs[theta] = np.max(np.abs(tr.fields[-1].values - ref)
                                 / np.abs(ref))
        assert errs[0.5] < 0.5 * errs[1.0]
        assert errs[1.0] < 0.05

    def test_newton_divergence_raised(self, ref_params, small_grid):
        p = ref_params
        u = RadialField(small_grid, initial_profile(p, small_grid.nodes))
        cfg = SolverConfig(dt0=1.0, t_end=1.0, newton_tol=1e-15,
                           newton_max=1)
        with pytest.raises(NewtonDivergence):
            step(u, 1.0, cfg, p)


class TestSolve:
    def test_zero_inner_amplitude_short_circuits(self, small_grid):
        p = FlowParams(n=5, m=3 / 7, lam=4.0, c1=0.0, c2=2.0)
        tr = solve(p, small_grid, SolverConfig(dt0=1e-3, t_end=1.0))
        for f in tr.fields:
            np.testing.assert_array_equal(f.values,
                                          np.full(small_grid.size, 2.0))

    def test_initial_field_is_the_sampled_profile(self, ref_params,
                                                  short_run):
        np.testing.assert_array_equal(
            short_run.fields[0].values,
            initial_profile(ref_params, short_run.grid.nodes))
        assert short_run.times[0] == 0.0

    def test_bounded_by_initial_profile(self, ref_params, short_run):
        u0 = initial_profile(ref_params, short_run.grid.nodes)
        for f in short_run.fields:
            assert np.all(f.values <= u0 * (1 + 1e-10))

    def test_monotone_in_time(self, short_run):
        for earlier, later in zip(short_run.fields, short_run.fields[1:]):
            assert np.all(later.values <= earlier.values * (1 + 1e-10))

    def test_boundary_values_pinned(self, ref_params, short_run):
        u0 = initial_profile(ref_params, short_run.grid.nodes)
        for f in short_run.fields:
            assert f.values[0] == u0[0] and f.values[-1] == u0[-1]

    def test_sandwich_margins_recorded(self, short_run):
        assert short_run.sub_cfg is not None
        assert len(short_run.sandwich) == len(short_run.times)
        for _, low, high in short_run.sandwich:
            assert low <= 1e-6 and high <= 1e-6

    def test_requested_output_times_are_hit(self, ref_params, small_grid):
        cfg = SolverConfig(dt0=1e-3, t_end=0.2)
        tr = solve(ref_params, small_grid, cfg, out_times=[0.05, 0.125],
                   check_sandwich=False)
        for want in (0.05, 0.125, 0.2):
            assert any(t == want for t in tr.times)

    def test_comparison_preservation(self, small_grid):
        # ordered initial data stay ordered under the discrete flow
        cfg = SolverConfig(dt0=1e-3, t_end=0.3)
        lo = solve(FlowParams(n=5, m=3 / 7, lam=4.0, c1=1.0, c2=1.0),
                   small_grid, cfg, out_times=[0.1, 0.3],
                   check_sandwich=False)
        hi = solve(FlowParams(n=5, m=3 / 7, lam=4.0, c1=1.2, c2=1.0),
                   small_grid, cfg, out_times=[0.1, 0.3],
                   check_sandwich=False)
        for t in (0.1, 0.3):
            ul = lo.fields[lo.times.index(t)].values
            uh = hi.fields[hi.times.index(t)].values
            assert np.all(ul <= uh * (1 + 1e-8))

    def test_rejects_ball_grid(self, ref_params):
        g = build_ball_grid(1e-2, 1e2, 64)
        with pytest.raises(ValueError):
            solve(ref_params, g, SolverConfig(dt0=1e-3, t_end=0.1))


@pytest.fixture(scope="module")
def eps_run(ref_params):
    grid = build_ball_grid(1e-3, 1e3, 512)
    cfg = SolverConfig(dt0=1e-5, t_end=0.5, newton_tol=1e-10)
    rc = RegularizationConfig(0.1)
    return rc, solve_regularized(ref_params, rc, grid, cfg)


class TestRegularized:

    def test_uniform_upper_bound(self, ref_params, eps_run):
        # (c1^m r^(-m lam) + c2^m + 1)^(1/m), independent of epsilon
        p = ref_params
        _, tr = eps_run
        r = tr.grid.nodes[1:]
        bound = (p.c1 ** p.m * r ** (-p.m * p.lam)
                 + p.c2 ** p.m + 1.0) ** (1.0 / p.m)
        for f in tr.fields:
            assert np.all(f.values[1:] <= bound * (1 + 1e-9))

    def test_floor_at_epsilon(self, eps_run):
        rc, tr = eps_run
        for f in tr.fields:
            assert np.all(f.values >= rc.epsilon)

    def test_monotone_in_time(self, eps_run):
        _, tr = eps_run
        for earlier, later in zip(tr.fields, tr.fields[1:]):
            assert np.all(later.values <= earlier.values * (1 + 1e-8))

    def test_initial_field_matches_smoothed_datum(self, ref_params, eps_run):
        rc, tr = eps_run
        np.testing.assert_array_equal(
            tr.fields[0].values,
            regularized_initial(ref_params, rc, tr.grid.nodes))

    def test_rejects_annulus_grid(self, ref_params, small_grid):
        with pytest.raises(ValueError):
            solve_regularized(ref_params, RegularizationConfig(0.1),
                              small_grid, SolverConfig(dt0=1e-3, t_end=0.1))


class TestClauseReport:
    def test_windows_exclude_boundary_nodes(self, small_grid):
        inner, outer = clause_windows(small_grid)
        r = small_grid.nodes
        assert not inner[:6].any() and not outer[-6:].any()
        assert r[inner].max() <= 10 * small_grid.r_min
        assert r[outer].min() >= small_grid.r_max / 10

    def test_monotonicity_clauses_hold(self, short_run):
        rows = verify_theorem_clauses(short_run)
        for row in rows:
            if row["clause"] in ("i", "ii"):
                assert row["metric"] <= 1e-8, row

    def test_profile_clauses_hold_at_time_zero(self, short_run):
        rows = [r for r in verify_theorem_clauses(short_run)
                if r["t"] == 0.0]
        by_clause = {r["clause"]: r for r in rows}
        assert by_clause["iii"]["pass"] and by_clause["iv"]["pass"]
        assert by_clause["v"]["pass"]

    def test_rejects_degenerate_amplitudes(self, small_grid):
        p = FlowParams(n=5, m=3 / 7, lam=4.0, c1=0.0, c2=1.0)
        tr = solve(p, small_grid, SolverConfig(dt0=1e-3, t_end=0.1))
        with pytest.raises(ValueError):
            verify_theorem_clauses(tr)


class TestTrajectoryCSV:
    def test_round_trip(self, ref_params, short_run, tmp_path):
        path = tmp_path / "traj.csv"
        export_trajectory(short_run, path, stride=4)
        back = import_trajectory(path, ref_params, short_run.grid)
        kept = sorted(set(range(0, len(short_run.times), 4))
                      | {0, len(short_run.times) - 1})
        assert back.times == [short_run.times[i] for i in kept]
        for i, j in enumerate(kept):
            np.testing.assert_array_equal(back.fields[i].values,
                                          short_run.fields[j].values)

    def test_byte_identical_rewrite(self, short_run, tmp_path):
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        export_trajectory(short_run, p1, stride=8)
        export_trajectory(short_run, p2, stride=8)
        assert p1.read_bytes() == p2.read_bytes()

    def test_grid_mismatch_detected(self, ref_params, short_run, tmp_path):
        path = tmp_path / "traj.csv"
        export_trajectory(short_run, path, stride=16)
        other = build_grid(1e-2, 1e2, 255)
        with pytest.raises(ValueError):
            import_trajectory(path, ref_params, other)


class TestSteadyOracle:
    def test_matches_boundary_values(self, ref_params, small_grid):
        p = ref_params
        alpha, beta = steady_state_reference(p, small_grid)
        w = steady_profile(p, alpha, beta,
                           [small_grid.r_min, small_grid.r_max])
        assert w[0] == pytest.approx(initial_profile(p, small_grid.r_min),
                                     rel=1e-12)
        assert w[1] == pytest.approx(initial_profile(p, small_grid.r_max),
                                     rel=1e-12)

    def test_harmonic_coefficient_scales_with_inner_radius(self, ref_params):
        # beta ~ r_min^(n - 2 - m lam): halving r_min scales it by
        # 2^-(9/7) for the reference constants
        p = ref_params
        g1 = build_grid(1e-3, 1e3, 64)
        g2 = build_grid(5e-4, 1e3, 64)
        _, b1 = steady_state_reference(p, g1)
        _, b2 = steady_state_reference(p, g2)
        assert b2 / b1 == pytest.approx(0.5 ** (9.0 / 7.0), rel=1e-2)
