import dataclasses
import math

import numpy as np
import pytest

from fairdyn import (
    DistributionSpec,
    DomainError,
    Family,
    GroupState,
    Policy,
    Scenario,
    SolverError,
    dp_thresholds,
    inverse_tail,
    pareto_closed_form_threshold,
    solve_for_policy,
    solve_shared_threshold,
)
from conftest import family_scenario

# Root of 20 = 50 exp(-t/2) + 100 exp(-t/3), frozen from mpmath.
COMPACT_THETA = 5.384767336362078
LN6 = 1.791759469228055


class TestSharedThreshold:
    def test_reference_cutoff(self, compact):
        sol = solve_shared_threshold(compact, GroupState(2.0, 3.0))
        assert sol.theta == pytest.approx(COMPACT_THETA, abs=5e-3)   # headline value 5.385
        assert sol.theta == pytest.approx(COMPACT_THETA, abs=1e-9)   # true root
        assert sol.theta_c == sol.theta_nc
        assert sol.residual <= 1e-9 * compact.n

    def test_equal_means_collapse_to_inverse_tail(self, demo):
        for mu in (0.5, 5.0 / 3.0, 4.0):
            sol = solve_shared_threshold(demo, GroupState(mu, mu))
            expected = inverse_tail(demo.distribution, mu, demo.n / demo.m)
            assert sol.theta == pytest.approx(expected, rel=1e-9)
            assert sol.P_c == pytest.approx(demo.n / demo.m, rel=1e-9)

    def test_axis_state_closed_form(self, demo):
        # mu_c = 0: only the nonprotected group contributes, theta = mu ln(m_nc/n)
        sol = solve_shared_threshold(demo, GroupState(0.0, 2.5))
        assert sol.theta == pytest.approx(2.5 * math.log(200 / 50), abs=1e-9)
        assert sol.P_c == 0.0
        assert "protected_mean_zero" in sol.flags

    def test_both_means_zero_is_an_error(self, demo):
        with pytest.raises(SolverError):
            solve_shared_threshold(demo, GroupState(0.0, 0.0))

    @pytest.mark.parametrize("family", list(Family), ids=lambda f: f.value)
    def test_capacity_conservation_random_states(self, family):
        s = family_scenario(family)
        rng = np.random.default_rng(5)
        for _ in range(100):
            x = GroupState(rng.uniform(0.05, 6.0), rng.uniform(0.05, 6.0))
            sol = solve_shared_threshold(s, x)
            total = s.m_c * sol.P_c + s.m_nc * sol.P_nc
            assert abs(total - s.n) <= 1e-9 * s.n

    @pytest.mark.parametrize("family", list(Family), ids=lambda f: f.value)
    def test_lower_mean_never_gets_higher_probability(self, family):
        s = family_scenario(family)
        rng = np.random.default_rng(6)
        for _ in range(100):
            a, b = sorted(rng.uniform(0.05, 6.0, size=2))
            sol = solve_shared_threshold(s, GroupState(a, b))
            assert sol.P_c <= sol.P_nc + 1e-12


class TestDpThresholds:
    def test_rate_is_exactly_capacity_share(self, demo_dp):
        sol = dp_thresholds(demo_dp, GroupState(5 / 3, 5 / 3))
        assert sol.P_c == sol.P_nc == demo_dp.n / demo_dp.m
        assert sol.theta_c == pytest.approx((5 / 3) * math.log(6), abs=1e-12)
        assert sol.theta_c == pytest.approx(2.9862657820467583, abs=1e-9)

    def test_unequal_means_example(self, demo_dp):
        sol = dp_thresholds(demo_dp, GroupState(1.0, 2.0))
        assert sol.theta_c == pytest.approx(LN6, abs=1e-12)
        assert sol.theta_nc == pytest.approx(2 * LN6, abs=1e-12)

    def test_equal_means_match_shared_solution(self, demo, demo_dp):
        x = GroupState(2.2, 2.2)
        shared = solve_shared_threshold(demo, x)
        dp = dp_thresholds(demo_dp, x)
        assert dp.theta_c == pytest.approx(shared.theta, rel=1e-9)
        assert dp.P_c == pytest.approx(shared.P_c, rel=1e-9)

    def test_rate_independent_of_state(self, demo_dp):
        rng = np.random.default_rng(9)
        for _ in range(50):
            x = GroupState(rng.uniform(0.01, 8), rng.uniform(0.01, 8))
            sol = dp_thresholds(demo_dp, x)
            assert sol.P_c == demo_dp.n / demo_dp.m
            assert sol.P_nc == demo_dp.n / demo_dp.m

    def test_zero_mean_group_flagged_with_support_minimum(self, demo_dp):
        sol = dp_thresholds(demo_dp, GroupState(0.0, 2.0))
        assert sol.theta_c == 0.0
        assert sol.P_c == demo_dp.n / demo_dp.m
        assert any("unreachable" in f for f in sol.flags)

    def test_policy_dispatch(self, demo, demo_dp):
        x = GroupState(1.0, 2.0)
        assert solve_for_policy(demo, x).policy is Policy.SHARED
        assert solve_for_policy(demo_dp, x).policy is Policy.DP


class TestParetoClosedForm:
    def test_worked_example_exact(self):
        s = Scenario(100, 200, 50, 0.5, 5.0, DistributionSpec(Family.PARETO, k=2.0))
        cf = pareto_closed_form_threshold(s, GroupState(1.0, 2.0))
        assert cf.P_c == pytest.approx(50 / 900, rel=1e-14)
        assert cf.P_nc == pytest.approx(200 / 900, rel=1e-14)
        assert s.m_c * cf.P_c + s.m_nc * cf.P_nc == pytest.approx(50, abs=1e-12 * 50)
        assert cf.theta == pytest.approx(0.5 * math.sqrt(900 / 50), rel=1e-14)
        assert cf.valid

    def test_equal_means_rate(self):
        s = Scenario(100, 200, 50, 0.5, 5.0, DistributionSpec(Family.PARETO, k=3.0))
        cf = pareto_closed_form_threshold(s, GroupState(2.0, 2.0))
        assert cf.P_c == pytest.approx(s.n / s.m, rel=1e-14)
        assert cf.P_nc == pytest.approx(s.n / s.m, rel=1e-14)

    def test_matches_numeric_solver(self):
        rng = np.random.default_rng(42)
        checked = 0
        for _ in range(300):
            k = rng.uniform(1.2, 6.0)
            m_c = int(rng.integers(20, 300))
            m_nc = int(rng.integers(20, 300))
            n = int(rng.integers(1, min(m_c, m_nc)))
            s = Scenario(m_c, m_nc, n, 0.5, 5.0, DistributionSpec(Family.PARETO, k=k))
            x = GroupState(rng.uniform(0.05, 5.0), rng.uniform(0.05, 5.0))
            cf = pareto_closed_form_threshold(s, x)
            if not cf.valid:
                continue
            sol = solve_shared_threshold(s, x)
            assert cf.theta == pytest.approx(sol.theta, abs=1e-8)
            assert cf.P_c == pytest.approx(sol.P_c, abs=1e-8)
            assert cf.P_nc == pytest.approx(sol.P_nc, abs=1e-8)
            checked += 1
        assert checked > 250

    def test_validity_flag_when_formula_premise_fails(self):
        # n close to m forces theta below the richer group's support minimum
        s = Scenario(100, 200, 280, 0.5, 5.0, DistributionSpec(Family.PARETO, k=2.0))
        cf = pareto_closed_form_threshold(s, GroupState(0.1, 5.0))
        assert not cf.valid

    def test_rejects_other_families(self, demo):
        with pytest.raises(DomainError):
            pareto_closed_form_threshold(demo, GroupState(1.0, 1.0))


class TestGroupState:
    def test_rejects_negative_or_nonfinite(self):
        with pytest.raises(DomainError):
            GroupState(-0.1, 1.0)
        with pytest.raises(DomainError):
            GroupState(math.nan, 1.0)
        with pytest.raises(DomainError):
            GroupState(1.0, math.inf)
