"""Finite-population sampling harness.

Draws whole populations from the scenario's score distributions, runs the
top-n classifier (or its demographic-parity variant) on the sample, and
aggregates acceptance counts, accuracy, and rate gaps across trials. The
expected-value model treats the per-group acceptance count as binomial;
the aggregation reports z-scores against those moments.

Everything is seeded and deterministic: per-trial seeds derive from the
master seed and trial index through a SeedSequence, so trials can run in
any order (or in parallel) without changing the output.

Extension point (deliberately not implemented): feeding the sampled
acceptance rates back into the mean update would give a stochastic
closed-loop variant; the dynamics module only consumes expected rates.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .analysis import worker_count
from .errors import DomainError
from .scenario import Family, Policy, Scenario
from .threshold import GroupState, solve_for_policy


@dataclass(frozen=True)
class Population:
    """One sampled population: tags[i] is "c" or "nc", scores[i] its score.

    Group C occupies the first m_c slots.
    """

    tags: np.ndarray
    scores: np.ndarray


def trial_seed(master_seed: int, index: int) -> int:
    """Deterministic 64-bit substream seed for one trial."""
    return int(np.random.SeedSequence((master_seed, index)).generate_state(1, np.uint64)[0])


def sample_population(s: Scenario, x: GroupState, seed: int) -> Population:
    """Inverse-transform draws for both groups from a seeded generator.

    A zero-mean group yields all-zero scores for the exponential family and
    is an error for Pareto and Gaussian (their densities need mean > 0).
    """
    spec = s.distribution
    if spec.family is not Family.EXPONENTIAL:
        for name, mu in (("mu_c", x.mu_c), ("mu_nc", x.mu_nc)):
            if mu == 0.0:
                raise DomainError(
                    f"{name} = 0: cannot sample the {spec.family.value} family at mean zero")
    rng = np.random.Generator(np.random.PCG64(seed))
    parts = []
    for mu, size in ((x.mu_c, s.m_c), (x.mu_nc, s.m_nc)):
        u = rng.random(size)
        u = np.where(u == 0.0, 2.0 ** -53, u)
        if mu == 0.0:
            parts.append(np.zeros(size))
        elif spec.family is Family.EXPONENTIAL:
            parts.append(-mu * np.log1p(-u))
        elif spec.family is Family.PARETO:
            x_min = (spec.k - 1.0) / spec.k * mu
            parts.append(x_min * (1.0 - u) ** (-1.0 / spec.k))
        else:
            parts.append(mu + spec.sigma * ndtri(u))
    tags = np.repeat(np.array(["c", "nc"]), [s.m_c, s.m_nc])
    return Population(tags=tags, scores=np.concatenate(parts))


@dataclass(frozen=True)
class TrialOutcome:
    accepted_c: int
    accepted_nc: int
    true_top_n_in_c: int
    accuracy: float
    dp_gap: float
    seed: int


def dp_seat_split(s: Scenario) -> tuple[int, int]:
    """Per-group acceptance counts realizing equal rates up to rounding.

    Nearest-integer seats for group C, clamped so the totals stay n.
    """
    n_c = int(math.floor(s.n * s.m_c / s.m + 0.5))
    n_c = min(n_c, s.m_c, s.n)
    n_c = max(n_c, s.n - s.m_nc, 0)
    return n_c, s.n - n_c


def run_trial(s: Scenario, x: GroupState, seed: int) -> TrialOutcome:
    """Sample one population and classify it under the scenario's policy.

    Ground truth y marks the global top n scores (ties broken by stable
    index), under either policy; the shared-threshold classifier accepts
    exactly that set, so its accuracy is 1 by construction.
    """
    pop = sample_population(s, x, seed)
    scores = pop.scores
    m = scores.size
    order = np.argsort(-scores, kind="stable")
    y = np.zeros(m, dtype=bool)
    y[order[: s.n]] = True

    if s.policy is Policy.DP:
        n_c, n_nc = dp_seat_split(s)
        f = np.zeros(m, dtype=bool)
        c_scores = scores[: s.m_c]
        nc_scores = scores[s.m_c:]
        f[np.argsort(-c_scores, kind="stable")[:n_c]] = True
        f[s.m_c + np.argsort(-nc_scores, kind="stable")[:n_nc]] = True
    else:
        f = y

    accepted_c = int(f[: s.m_c].sum())
    accepted_nc = int(f[s.m_c:].sum())
    return TrialOutcome(
        accepted_c=accepted_c,
        accepted_nc=accepted_nc,
        true_top_n_in_c=int(y[: s.m_c].sum()),
        accuracy=float((f == y).mean()),
        dp_gap=abs(accepted_c / s.m_c - accepted_nc / s.m_nc),
        seed=seed,
    )


def run_trials(s: Scenario, x: GroupState, trials: int, seed: int) -> list[TrialOutcome]:
    """Independent seeded trials, gathered by index (parallel-safe)."""
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    seeds = [trial_seed(seed, i) for i in range(trials)]
    workers = min(worker_count(), max(1, trials // 256))
    if workers <= 1:
        return [run_trial(s, x, sd) for sd in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda sd: run_trial(s, x, sd), seeds))


@dataclass(frozen=True)
class TrialSummary:
    trials: int
    seed: int
    accepted_c_mean: float
    accepted_c_var: float
    accepted_nc_mean: float
    accepted_nc_var: float
    accuracy_mean: float
    dp_gap_mean: float
    model_P_c: float
    model_P_nc: float
    expected_c: float
    expected_nc: float
    z_c: float
    z_nc: float
    flags: tuple[str, ...] = ()


def summarize_trials(s: Scenario, x: GroupState, outcomes: list[TrialOutcome],
                     seed: int) -> TrialSummary:
    """Aggregate outcomes and compare against the binomial moments
    m_g * P_g and m_g * P_g * (1 - P_g) implied by the expected model."""
    sol = solve_for_policy(s, x)
    trials = len(outcomes)
    acc_c = np.array([o.accepted_c for o in outcomes], dtype=float)
    acc_nc = np.array([o.accepted_nc for o in outcomes], dtype=float)
    exp_c = s.m_c * sol.P_c
    exp_nc = s.m_nc * sol.P_nc

    def z(emp_mean: float, m_g: int, P_g: float) -> float:
        var = m_g * P_g * (1.0 - P_g)
        if var <= 0.0:
            return 0.0
        return (emp_mean - m_g * P_g) / math.sqrt(var / trials)

    return TrialSummary(
        trials=trials,
        seed=seed,
        accepted_c_mean=float(acc_c.mean()),
        accepted_c_var=float(acc_c.var(ddof=1)) if trials > 1 else 0.0,
        accepted_nc_mean=float(acc_nc.mean()),
        accepted_nc_var=float(acc_nc.var(ddof=1)) if trials > 1 else 0.0,
        accuracy_mean=float(np.mean([o.accuracy for o in outcomes])),
        dp_gap_mean=float(np.mean([o.dp_gap for o in outcomes])),
        model_P_c=sol.P_c,
        model_P_nc=sol.P_nc,
        expected_c=exp_c,
        expected_nc=exp_nc,
        z_c=z(float(acc_c.mean()), s.m_c, sol.P_c),
        z_nc=z(float(acc_nc.mean()), s.m_nc, sol.P_nc),
        flags=s.flags() + sol.flags,
    )


def aggregate_trials(s: Scenario, x: GroupState, trials: int, seed: int) -> TrialSummary:
    return summarize_trials(s, x, run_trials(s, x, trials, seed), seed)


TRIAL_CSV_HEADER = "trial,accepted_c,accepted_nc,accuracy,dp_gap"


def write_trials_csv(outcomes: list[TrialOutcome], fh: io.TextIOBase) -> None:
    fh.write(TRIAL_CSV_HEADER + "\n")
    for i, o in enumerate(outcomes):
        fh.write(f"{i},{o.accepted_c},{o.accepted_nc},{o.accuracy!r},{o.dp_gap!r}\n")
