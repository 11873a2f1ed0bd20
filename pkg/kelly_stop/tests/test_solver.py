import numpy as np
import pytest

from kelly_stop import analytic, solver
from kelly_stop.core import DomainError, Grid, ParameterError, ProblemKind, StrategySurface


class TestStep:
    def test_linear_row_is_stationary(self):
        z = np.linspace(0.0, 1.0, 11)
        row = solver.step_explicit_euler(1.0 - z, 0.004, 0.1)
        np.testing.assert_allclose(row, 1.0 - z, atol=1e-14)

    def test_initial_step(self):
        z = np.linspace(0.0, 1.0, 11)
        row = np.ones(11)
        row[-1] = 0.0
        new = solver.step_explicit_euler(row, 0.004, 0.1)
        # Only the node next to the stop sees curvature.
        np.testing.assert_array_equal(new[:-2], 1.0)
        assert new[-2] == pytest.approx(1.0 - 0.4 * z[-2] ** 2)
        assert new[-1] == 0.0

    def test_boundaries_carried(self):
        row = np.array([0.3, 0.5, 0.9])
        new = solver.step_explicit_euler(row, 0.1, 0.5)
        assert new[0] == 0.3 and new[-1] == 0.9

    def test_bump_is_monotone(self):
        z = np.linspace(0.0, 1.0, 21)
        base = 1.0 - z
        plain = solver.step_explicit_euler(base, 0.4 * 0.05 ** 2, 0.05)
        for j in range(1, 20):
            bumped = base.copy()
            bumped[j] += 1e-6
            moved = solver.step_explicit_euler(bumped, 0.4 * 0.05 ** 2, 0.05) - plain
            assert np.all(moved >= 0.0)
            assert moved[j] > 0.0

    def test_comparison_principle(self):
        z = np.linspace(0.0, 1.0, 41)
        dz = z[1]
        lower, upper = 1.0 - z, 1.0 - z ** 3
        for _ in range(500):
            lower = solver.step_explicit_euler(lower, 0.4 * dz * dz, dz)
            upper = solver.step_explicit_euler(upper, 0.4 * dz * dz, dz)
            assert np.all(upper - lower >= -1e-14)
        np.testing.assert_allclose(lower, 1.0 - z, atol=1e-12)
        assert np.all(upper[1:-1] > lower[1:-1])

    def test_too_short(self):
        with pytest.raises(ParameterError):
            solver.step_explicit_euler(np.array([1.0, 0.0]), 0.1, 0.5)


class TestSolve:
    def test_boundaries(self, small_surface):
        u = small_surface.values
        assert small_surface.problem is ProblemKind.stop_loss
        np.testing.assert_array_equal(u[:, 0], 1.0)
        np.testing.assert_array_equal(u[:, -1], 0.0)
        np.testing.assert_array_equal(u[0, :-1], 1.0)

    def test_bounds(self, small_surface):
        u, z = small_surface.values, small_surface.z
        assert np.all(u <= 1.0 + 1e-12)
        assert np.all(u >= (1.0 - z) - 1e-12)

    def test_monotone(self, small_surface):
        u = small_surface.values
        assert np.all(np.diff(u, axis=0) <= 1e-12)
        assert np.all(np.diff(u, axis=1) <= 1e-12)

    def test_stored_planes(self, small_surface):
        grid = small_surface.grid
        assert small_surface.thetas[0] == 0.0
        assert small_surface.theta_max == pytest.approx(3.0)
        assert len(small_surface.thetas) <= solver.DEFAULT_STORED_PLANES + 2
        assert small_surface.thetas[-1] == grid.ntheta * grid.dtheta

    def test_stride(self):
        grid = Grid.for_horizon(10, 0.05)
        surface = solver.solve_stop_loss(solver.StopLossProblem(grid=grid, stride=1))
        assert len(surface.thetas) == grid.ntheta + 1
        with pytest.raises(ParameterError):
            solver.StopLossProblem(grid=grid, stride=0).plane_stride

    def test_for_market(self, dp):
        problem = solver.StopLossProblem.for_market(dp, '1m', 50)
        assert problem.theta_max == pytest.approx(1 / 24)
        assert problem.grid.stability_ratio <= 0.4 * (1 + 1e-12)
        assert solver.theta_span('1m', dp) == pytest.approx(1 / 24)

    def test_for_market_negative_premium(self):
        dp = analytic.DerivedParams(alpha_K=-0.8, sharpe=-0.2, tau=50.0)
        with pytest.raises(ParameterError):
            solver.StopLossProblem.for_market(dp, '1m', 50)

    def test_instability(self, monkeypatch):
        monkeypatch.setattr(solver, '_advance', lambda row, coef: row * np.inf)
        grid = Grid.for_horizon(10, 0.01)
        with pytest.raises(solver.SolverInstabilityError):
            solver.solve_stop_loss(solver.StopLossProblem(grid=grid))

    def test_box_violation(self, monkeypatch):
        monkeypatch.setattr(solver, '_advance', lambda row, coef: row * 1.5)
        grid = Grid.for_horizon(10, 0.01)
        with pytest.raises(solver.SolverInstabilityError) as exc:
            solver.solve_stop_loss(solver.StopLossProblem(grid=grid))
        assert 'left the box [1 - z, 1] at step 1' in str(exc.value)

    def test_default_stride(self):
        assert solver.default_stride(10) == 1
        assert solver.default_stride(10_000) == 10
        assert solver.default_stride(10_001) == 11


@pytest.mark.slow
class TestLongHorizon:
    @staticmethod
    def distance(surface, theta):
        cut = solver.extract_slice(surface, 'fixed-theta', theta)
        return float(np.max(np.abs(cut.u - (1.0 - surface.z))))

    def test_asymptote(self, long_surface):
        # Measured 0.0309 at nz=200; the degenerate diffusion near both ends makes the
        # approach to 1 - z algebraic in theta.
        assert self.distance(long_surface, 5.0) <= 0.035

    def test_theta_two(self, long_surface):
        # Measured 0.1007.
        assert self.distance(long_surface, 2.0) <= 0.11

    def test_algebraic_decay(self, long_surface):
        distances = [self.distance(long_surface, theta) for theta in (0.5, 1.0, 2.0, 3.0, 5.0)]
        assert all(a > b for a, b in zip(distances, distances[1:]))
        # Roughly theta^-1.3 between theta = 2 and 5.
        rate = np.log(distances[2] / distances[-1]) / np.log(5.0 / 2.0)
        assert 1.1 <= rate <= 1.5

    def test_grid_convergence(self):
        # The jump at the (z=1, theta=0) corner limits the observed order to about one.
        report = solver.grid_convergence((50, 100, 200), theta_eval=0.5)
        assert report.nz == (50, 100, 200)
        assert report.differences[1] < report.differences[0]
        assert 0.9 <= report.order <= 1.3


class TestResiduals:
    def test_alpha_free_kelly_is_exact(self, dp, market):
        def alpha(pi, t):
            return analytic.FreeKelly().fraction(analytic.StrategyState(pi, t), dp, 1.0)

        report = solver.pde_residual_alpha(alpha, market.sigma, (1.3, 0.5), 1e-2, 1e-2)
        assert report.residual == 0.0
        assert (report.x, report.t) == (1.3, 0.5)

    def test_alpha_terminal_stop_order(self, dp, market):
        s = analytic.TerminalStop(0.95)

        def alpha(pi, t):
            return s.fraction(analytic.StrategyState(pi, t), dp, 1.0)

        errors = [abs(solver.pde_residual_alpha(alpha, market.sigma, (1.3, 0.5), h, h).residual)
                  for h in (1e-2, 5e-3, 2.5e-3)]
        assert errors[0] > errors[1] > errors[2]
        assert errors[0] / errors[1] == pytest.approx(4.0, rel=0.05)

    def test_gamma_terminal_stop(self, dp, market):
        report = solver.pde_residual_gamma(lambda pi, t: dp.alpha_K * (pi - 0.95), market.sigma,
                                           (1.3, 0.5), 1e-3)
        assert abs(report.residual) < 1e-9

    def test_gamma_nonsolution(self, market):
        # gamma = pi^2 gives 2 * (sigma^2 / 2) * pi^4 at pi = 1.
        report = solver.pde_residual_gamma(lambda pi, t: pi * pi, market.sigma, (1.0, 0.5), 1e-3)
        assert report.residual == pytest.approx(market.sigma ** 2, rel=1e-6)

    def test_scaled(self):
        report = solver.pde_residual_scaled(lambda z, theta: 1.0 - z, (0.6, 0.5), 1e-3, 1e-3)
        assert abs(report.residual) < 1e-9
        sep = solver.pde_residual_scaled(analytic.separable_strategy, (2.0, 0.5), 1e-3, 1e-3)
        assert abs(sep.residual) < 1e-5

    def test_w(self):
        report = solver.pde_residual_w(lambda pi, theta: pi - 0.95, (1.3, 0.5), 1e-3, 1e-3)
        assert abs(report.residual) < 1e-9

    def test_invalid_step(self):
        with pytest.raises(ParameterError):
            solver.pde_residual_w(lambda pi, theta: pi, (1.3, 0.5), 0.0, 1e-3)


class TestSelfFinancing:
    def test_solved_surface(self, small_surface, dp):
        report = solver.self_financing_balance(small_surface, dp, (0.5, 0.5), pi_c=0.95)
        # Truncation error of the solve, sampled on stored planes.
        assert abs(report.aux) < 1e-2
        assert report.residual == pytest.approx(-dp.alpha_K * (0.95 / report.x) / dp.tau
                                                * report.aux)

    def test_exact_surface(self, dp):
        grid = Grid(nz=19, dtheta=0.001, ntheta=10)
        surface = StrategySurface.from_function(grid, [0.0, 0.01, 0.02],
                                                lambda z, theta: 1.0 - z)
        report = solver.self_financing_balance(surface, dp, (0.5, 0.01))
        assert abs(report.residual) < 1e-12

    def test_perturbed_surface(self, dp):
        # u = 1 - z + 0.1 z (1 - z) is time independent with u_zz = -0.2.
        grid = Grid(nz=19, dtheta=0.001, ntheta=10)
        surface = StrategySurface.from_function(
            grid, [0.0, 0.01, 0.02], lambda z, theta: 1.0 - z + 0.1 * z * (1.0 - z))
        report = solver.self_financing_balance(surface, dp, (0.5, 0.01))
        assert report.aux == pytest.approx(0.2 * 0.525 ** 2 * 0.25, rel=1e-9)
        # pi = 2 with the default pi_c = 1.
        assert report.residual == pytest.approx(-10.0 * report.aux, rel=1e-9)
        assert report.residual < -0.1

    def test_boundary_point(self, small_surface, dp):
        with pytest.raises(DomainError):
            solver.self_financing_balance(small_surface, dp, (0.0, 0.5))
        with pytest.raises(DomainError):
            solver.self_financing_balance(small_surface, dp, (0.5, 0.0))


class TestSlices:
    def test_fixed_theta(self, small_surface):
        cut = solver.extract_slice(small_surface, solver.SliceMode.fixed_theta, 0.5)
        assert cut.mode is solver.SliceMode.fixed_theta
        np.testing.assert_array_equal(cut.coord, small_surface.z)
        assert cut.u[0] == pytest.approx(1.0)
        assert cut.u[-1] == 0.0

    def test_fixed_z(self, small_surface):
        cut = solver.extract_slice(small_surface, 'fixed-z', 0.85)
        np.testing.assert_array_equal(cut.coord, small_surface.thetas)
        assert cut.u[0] == pytest.approx(1.0)
        assert np.all(np.diff(cut.u) <= 1e-12)

    def test_fixed_delta(self, small_surface):
        by_delta = solver.extract_slice(small_surface, 'fixed-delta', 0.15, coords=[0.1, 0.2])
        by_z = solver.extract_slice(small_surface, 'fixed-z', 0.85, coords=[0.1, 0.2])
        np.testing.assert_allclose(by_delta.u, by_z.u)

    def test_out_of_range(self, small_surface):
        with pytest.raises(solver.SliceRangeError):
            solver.extract_slice(small_surface, 'fixed-theta', 3.5)
        with pytest.raises(solver.SliceRangeError):
            solver.extract_slice(small_surface, 'fixed-z', 1.5)
        with pytest.raises(ValueError):
            solver.extract_slice(small_surface, 'sideways', 0.5)


class TestRegions:
    def test_classify(self, small_surface):
        regions = solver.classify_regions(small_surface)
        assert regions.shape == small_surface.values.shape
        assert regions[0, 0] == solver.Region.free.value
        assert regions[-1, -1] == solver.Region.dead.value
        assert set(np.unique(regions)) <= {r.value for r in solver.Region}

    def test_classify_values(self):
        labels = solver.classify_values([0.05, 0.5, 0.95])
        assert labels.tolist() == ['dead-zone', 'transition', 'free-kelly']

    def test_invalid_thresholds(self, small_surface):
        with pytest.raises(ParameterError):
            solver.classify_regions(small_surface, dead=0.9, free=0.1)
