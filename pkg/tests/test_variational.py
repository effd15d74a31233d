import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monodim import exact
from monodim.distributions import ActivityDistribution
from monodim.variational import (
    ModelParams,
    SolverError,
    laplace_correction,
    phi,
    phi_double_prime,
    phi_prime,
    pressure_curve,
    solve_fixed_point,
    xi_star_bounds,
)

DIRAC = ActivityDistribution.dirac(1.0)
UNIFORM = ActivityDistribution.uniform(0.5, 1.5)
GOLDEN = (math.sqrt(5) - 1) / 2

# 40-digit reference values (mpmath; closed-form antiderivative and a
# 200-step bisection on xi = log((xi + 1.5) / (xi + 0.5)))
UNIFORM_PHI_AT_1 = 0.18252916752314108999
UNIFORM_XI_STAR = 0.63275984651104355751
UNIFORM_PRESSURE = 0.27398927854433297892
DIRAC_PRESSURE = 0.2902288194345508716


def bisect(g, lo, hi, steps=200):
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


class TestFunctional:
    def test_point_mass_values(self):
        assert phi(1.0, 1.0, DIRAC) == pytest.approx(-0.5 + math.log(2), abs=1e-15)
        assert phi(0.0, 1.0, DIRAC) == 0.0
        assert phi_double_prime(1.0, 1.0, DIRAC) == pytest.approx(-1.25, abs=1e-15)

    def test_uniform_value_against_antiderivative(self):
        assert phi(1.0, 1.0, UNIFORM) == pytest.approx(UNIFORM_PHI_AT_1, abs=1e-12)

    def test_negative_xi_rejected(self):
        with pytest.raises(ValueError):
            phi(-0.1, 1.0, UNIFORM)
        with pytest.raises(ValueError):
            phi_prime(0.0, 1.0, UNIFORM)

    def test_stationary_at_golden_ratio(self):
        assert abs(phi_prime(GOLDEN, 1.0, DIRAC)) <= 1e-12

    def test_slope_near_zero_is_inverse_mean(self):
        assert phi_prime(1e-12, 1.0, DIRAC) == pytest.approx(1.0, abs=1e-10)
        assert phi_prime(1e-9, 1.0, UNIFORM) == pytest.approx(UNIFORM.inv_mean(), rel=1e-7)

    def test_first_derivative_finite_difference(self):
        h = 1e-5
        fd = (phi(1 + h, 1.0, UNIFORM) - phi(1 - h, 1.0, UNIFORM)) / (2 * h)
        assert phi_prime(1.0, 1.0, UNIFORM) == pytest.approx(fd, abs=1e-8)

    def test_second_derivative_finite_difference(self):
        d, h = ActivityDistribution.dirac(2.0), 1e-5
        fd = (phi_prime(0.7 + h, 3.0, d) - phi_prime(0.7 - h, 3.0, d)) / (2 * h)
        assert phi_double_prime(0.7, 3.0, d) == pytest.approx(fd, abs=1e-8)

    @pytest.mark.parametrize("dist", [UNIFORM, ActivityDistribution.lognormal(0, 1), ActivityDistribution.exponential(1)],
                             ids=lambda d: d.kind)
    def test_strict_concavity(self, dist):
        w = 1.5
        lo, hi = xi_star_bounds(w, dist)
        for xi in np.geomspace(lo / 10, hi * 10, 25):
            assert phi_double_prime(xi, w, dist) < -1 / w


class TestBounds:
    def test_point_mass(self):
        lo, hi = xi_star_bounds(1.0, DIRAC)
        assert lo == pytest.approx(GOLDEN, abs=1e-15)
        assert hi == 1.0

    def test_small_coupling(self):
        for dist in (UNIFORM, ActivityDistribution.gamma(0.5, 1.0)):
            assert xi_star_bounds(1e-6, dist)[1] <= 1e-3

    def test_infinite_inverse_mean_falls_back(self):
        lo, hi = xi_star_bounds(4.0, ActivityDistribution.exponential(1.0))
        assert hi == 2.0 and 0 < lo < hi

    def test_quantile_term_can_beat_jensen(self):
        # heavy right tail: the mean is large but most mass sits near zero
        d = ActivityDistribution.lognormal(0.0, 2.0)
        w = 1.0
        jensen = 2 * w / (d.mean() + math.sqrt(d.mean() ** 2 + 4 * w))
        assert xi_star_bounds(w, d)[0] > jensen


class TestSolver:
    def test_point_mass_closed_form(self):
        sol = solve_fixed_point(1.0, DIRAC)
        assert sol.xi_star == pytest.approx(GOLDEN, abs=1e-12)
        assert sol.dimer_density == pytest.approx((3 - math.sqrt(5)) / 4, abs=1e-12)
        assert sol.monomer_density == pytest.approx(GOLDEN, abs=1e-12)
        assert sol.pressure == pytest.approx(DIRAC_PRESSURE, abs=1e-12)

    @pytest.mark.parametrize("w", [0.1, 1.0, 10.0])
    def test_single_atom_discrete_equals_dirac(self, w):
        a = solve_fixed_point(w, ActivityDistribution.discrete([(1.0, 1.0)]))
        b = solve_fixed_point(w, DIRAC)
        assert a.row() == b.row()

    def test_uniform_against_bisection(self):
        sol = solve_fixed_point(1.0, UNIFORM)
        oracle = bisect(lambda x: x - math.log((x + 1.5) / (x + 0.5)), 0.0, 2.0)
        assert sol.xi_star == pytest.approx(oracle, abs=1e-12)
        assert sol.xi_star == pytest.approx(UNIFORM_XI_STAR, abs=1e-12)
        assert sol.pressure == pytest.approx(UNIFORM_PRESSURE, abs=1e-11)
        assert abs(sol.xi_star - math.log((sol.xi_star + 1.5) / (sol.xi_star + 0.5))) <= 1e-12

    def test_solution_invariants(self):
        for dist in (UNIFORM, ActivityDistribution.gamma(2, 1), ActivityDistribution.discrete([(0.5, 0.5), (2, 0.5)])):
            sol = solve_fixed_point(ModelParams(2.0), dist)
            assert sol.lower_bound <= sol.xi_star <= sol.upper_bound
            assert sol.residual <= 1e-12
            assert sol.dimer_density == sol.xi_star ** 2 / 4.0
            assert sol.monomer_density == 1 - 2 * sol.dimer_density
            assert 0 < sol.dimer_density < 0.5

    def test_maximiser_of_functional(self):
        w = 1.0
        sol = solve_fixed_point(w, UNIFORM)
        assert abs(phi_prime(sol.xi_star, w, UNIFORM)) <= 1e-11
        for xi in np.linspace(0.0, 3 * sol.upper_bound, 100):
            assert sol.pressure >= phi(float(xi), w, UNIFORM) - 1e-13

    def test_iteration_limit_attaches_best(self):
        with pytest.raises(SolverError) as info:
            solve_fixed_point(ModelParams(1.0, fp_tol=1e-15, max_iter=1), UNIFORM)
        best = info.value.best
        assert best is not None and best.residual > 1e-15
        assert best.lower_bound <= best.xi_star <= best.upper_bound

    def test_invalid_params(self):
        for bad in (0.0, -1.0, math.nan, math.inf):
            with pytest.raises(ValueError):
                ModelParams(bad)

    @settings(max_examples=60, deadline=None)
    @given(x=st.floats(0.01, 50.0), w=st.floats(1e-4, 1e3))
    def test_point_mass_property(self, x, w):
        sol = solve_fixed_point(w, ActivityDistribution.dirac(x))
        xi = 2 * w / (x + math.sqrt(x * x + 4 * w))
        assert sol.xi_star == pytest.approx(xi, rel=1e-10)
        d = xi * xi / (2 * w)
        assert sol.pressure == pytest.approx(-d - 0.5 * math.log(2 * d / w), rel=1e-9, abs=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(a=st.floats(0.05, 3.0), width=st.floats(0.05, 3.0), w=st.floats(0.01, 50.0))
    def test_uniform_property_against_bisection(self, a, width, w):
        b = a + width
        sol = solve_fixed_point(w, ActivityDistribution.uniform(a, b))

        def g(x):
            # E[1/(x + u)] for u ~ U(a, b) in closed form
            return x - w * math.log((x + b) / (x + a)) / width

        oracle = bisect(g, 0.0, math.sqrt(w) * 2)
        assert sol.xi_star == pytest.approx(oracle, rel=1e-9, abs=1e-12)


class TestCurve:
    def test_point_mass_identity(self):
        for sol in pressure_curve(DIRAC, [0.5, 1.0, 2.0]):
            d = sol.dimer_density
            assert sol.pressure == pytest.approx(-d - 0.5 * math.log(2 * d / sol.w), abs=1e-10)

    def test_density_increases_with_coupling(self):
        grid = [0.25, 0.5, 1, 2, 4, 8]
        for dist in (UNIFORM, ActivityDistribution.lognormal(0, 1)):
            d = [s.dimer_density for s in pressure_curve(dist, grid)]
            assert all(b > a for a, b in zip(d, d[1:]))

    def test_density_increase_seen_at_finite_size(self):
        x = UNIFORM.sample(12, np.random.default_rng(12))
        dens = [exact.gibbs_observables(exact.CompleteModelInstance(x, w)).dimer_density for w in (0.5, 1, 2)]
        assert dens[0] < dens[1] < dens[2]

    def test_single_point_and_threads(self):
        (one,) = pressure_curve(UNIFORM, [1.0])
        assert one == solve_fixed_point(1.0, UNIFORM)
        grid = np.linspace(0.2, 5, 12)
        assert pressure_curve(UNIFORM, grid, threads=4) == pressure_curve(UNIFORM, grid)

    def test_grid_must_increase(self):
        with pytest.raises(ValueError):
            pressure_curve(UNIFORM, [1.0, 1.0])
        with pytest.raises(ValueError):
            pressure_curve(UNIFORM, [2.0, 1.0])


def test_laplace_term_point_mass():
    w = 2.0
    xi = solve_fixed_point(w, DIRAC).xi_star
    want = -0.5 * math.log(1 + w / (xi + 1) ** 2)
    assert laplace_correction(w, DIRAC) == pytest.approx(want, rel=1e-12)
