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
    aggregate_trials,
    run_trial,
    run_trials,
    sample_population,
    solve_for_policy,
    summarize_trials,
)
from fairdyn.montecarlo import dp_seat_split, trial_seed
from conftest import family_scenario


class TestSamplePopulation:
    def test_deterministic_for_fixed_seed(self, compact):
        a = sample_population(compact, GroupState(2.0, 3.0), seed=123)
        b = sample_population(compact, GroupState(2.0, 3.0), seed=123)
        assert np.array_equal(a.scores, b.scores)
        assert np.array_equal(a.tags, b.tags)
        c = sample_population(compact, GroupState(2.0, 3.0), seed=124)
        assert not np.array_equal(a.scores, c.scores)

    def test_group_layout(self, compact):
        pop = sample_population(compact, GroupState(2.0, 3.0), seed=5)
        assert pop.scores.size == compact.m
        assert (pop.tags[: compact.m_c] == "c").all()
        assert (pop.tags[compact.m_c:] == "nc").all()

    def test_exponential_sample_mean_clt_bound(self):
        s = Scenario(500_000, 500_000, 10, 0.5, 5.0, DistributionSpec(Family.EXPONENTIAL))
        pop = sample_population(s, GroupState(2.0, 2.0), seed=77)
        assert pop.scores.size == 1_000_000
        assert abs(pop.scores.mean() - 2.0) < 3.0 * 2.0 / math.sqrt(1_000_000)

    def test_pareto_support_minimum(self):
        s = family_scenario(Family.PARETO)  # k = 2
        pop = sample_population(s, GroupState(1.0, 2.0), seed=9)
        assert (pop.scores[: s.m_c] >= 0.5).all()
        assert (pop.scores[s.m_c:] >= 1.0).all()

    def test_zero_mean_exponential_emits_zeros(self, compact):
        pop = sample_population(compact, GroupState(0.0, 3.0), seed=3)
        assert (pop.scores[: compact.m_c] == 0.0).all()

    def test_zero_mean_rejected_for_other_families(self):
        for fam in (Family.PARETO, Family.GAUSSIAN):
            s = family_scenario(fam)
            with pytest.raises(DomainError):
                sample_population(s, GroupState(0.0, 1.0), seed=1)


class TestRunTrial:
    def test_shared_policy_accuracy_is_one_by_construction(self, compact):
        for seed in range(20):
            out = run_trial(compact, GroupState(2.0, 3.0), seed=trial_seed(0, seed))
            assert out.accuracy == 1.0
            assert out.accepted_c + out.accepted_nc == compact.n
            assert out.true_top_n_in_c == out.accepted_c

    def test_counts_bounded_by_group_sizes(self, compact):
        out = run_trial(compact, GroupState(2.0, 3.0), seed=42)
        assert 0 <= out.accepted_c <= compact.m_c
        assert 0 <= out.accepted_nc <= compact.m_nc

    def test_dp_seat_split_rounds_and_clamps(self, compact):
        dp = dataclasses.replace(compact, policy=Policy.DP)
        n_c, n_nc = dp_seat_split(dp)
        # 20 * 50/150 = 6.67 -> 7 seats for C
        assert (n_c, n_nc) == (7, 13)
        tiny = Scenario(3, 100, 20, 0.5, 5.0, DistributionSpec(Family.EXPONENTIAL),
                        policy=Policy.DP)
        n_c, n_nc = dp_seat_split(tiny)
        assert n_c <= 3 and n_c + n_nc == 20

    def test_dp_policy_accuracy_below_one_with_unequal_means(self, compact):
        dp = dataclasses.replace(compact, policy=Policy.DP)
        accs = [run_trial(dp, GroupState(1.0, 3.0), seed=trial_seed(1, i)).accuracy
                for i in range(200)]
        assert np.mean(accs) < 1.0

    def test_dp_rates_match_up_to_rounding(self, compact):
        dp = dataclasses.replace(compact, policy=Policy.DP)
        out = run_trial(dp, GroupState(1.0, 3.0), seed=11)
        assert out.dp_gap <= 1.0 / min(dp.m_c, dp.m_nc) + 1e-12


class TestAggregation:
    def test_single_trial_summary_echoes_outcome(self, compact):
        x = GroupState(2.0, 3.0)
        outcome = run_trial(compact, x, seed=trial_seed(123, 0))
        summary = aggregate_trials(compact, x, trials=1, seed=123)
        assert summary.accepted_c_mean == outcome.accepted_c
        assert summary.accepted_nc_mean == outcome.accepted_nc
        assert summary.accuracy_mean == outcome.accuracy
        assert summary.dp_gap_mean == outcome.dp_gap
        assert summary.accepted_c_var == 0.0

    def test_bit_identical_summaries(self, compact):
        x = GroupState(2.0, 3.0)
        a = aggregate_trials(compact, x, trials=300, seed=9)
        b = aggregate_trials(compact, x, trials=300, seed=9)
        assert a == b

    def test_worker_count_invariance(self, compact, monkeypatch):
        x = GroupState(2.0, 3.0)
        monkeypatch.setenv("FAIRDYN_WORKERS", "1")
        a = aggregate_trials(compact, x, trials=600, seed=9)
        monkeypatch.setenv("FAIRDYN_WORKERS", "4")
        b = aggregate_trials(compact, x, trials=600, seed=9)
        assert a == b

    def test_binomial_mean_z_scores(self, compact):
        # footnote-style binomial moments: expected counts m_g * P_g
        summary = aggregate_trials(compact, GroupState(2.0, 3.0), trials=2000, seed=31)
        assert abs(summary.z_c) < 4.0
        assert abs(summary.z_nc) < 4.0
        assert summary.expected_c == pytest.approx(50 * 0.06771932642881883, abs=1e-6)

    def test_acceptance_variance_shrinks_under_top_n_coupling(self, compact):
        # The exact top-n classifier pins accepted_c + accepted_nc = n, so the
        # per-group count variance sits below the independent-binomial value
        # (and the two groups share one variance). The binomial figure remains
        # an upper bound, not a match.
        summary = aggregate_trials(compact, GroupState(2.0, 3.0), trials=4000, seed=17)
        sol = solve_for_policy(compact, GroupState(2.0, 3.0))
        binom_c = compact.m_c * sol.P_c * (1 - sol.P_c)
        assert summary.accepted_c_var == pytest.approx(summary.accepted_nc_var, rel=1e-12)
        assert summary.accepted_c_var < binom_c
        assert summary.accepted_c_var > 0.5 * binom_c

    def test_shared_dp_gap_tracks_model_rate_difference(self, compact):
        x = GroupState(2.0, 3.0)
        summary = aggregate_trials(compact, x, trials=3000, seed=23)
        sol = solve_for_policy(compact, x)
        model_gap = abs(sol.P_c - sol.P_nc)
        # 3 standard errors of the per-trial gap spread
        outcomes = run_trials(compact, x, 3000, 23)
        gaps = np.array([o.dp_gap for o in outcomes])
        stderr = gaps.std(ddof=1) / math.sqrt(gaps.size)
        assert abs(summary.dp_gap_mean - model_gap) < 3 * stderr + 1e-3

    def test_trials_validation(self, compact):
        with pytest.raises(DomainError):
            run_trials(compact, GroupState(1, 1), trials=0, seed=0)


class TestSeedDerivation:
    def test_trial_seeds_are_stable_and_distinct(self):
        seeds = [trial_seed(42, i) for i in range(100)]
        assert seeds == [trial_seed(42, i) for i in range(100)]
        assert len(set(seeds)) == 100
        assert seeds != [trial_seed(43, i) for i in range(100)]
