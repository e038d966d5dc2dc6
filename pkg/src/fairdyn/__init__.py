"""Feedback-loop dynamics of top-n threshold classifiers.

Group score distributions, capacity-constrained acceptance thresholds,
mean-update trajectories, equilibria and their stability, and the
demographic-parity intervention, with a CLI emitting CSV/JSON artifacts.
"""

from .analysis import (
    BasinMap,
    Equilibrium,
    EquilibriumLabel,
    InstabilityCriterion,
    PhaseField,
    StabilityReport,
    analytic_equilibria,
    analytic_jacobian,
    basin_map,
    classify,
    eigen2,
    fd_jacobian,
    instability_condition,
    phase_field,
    refine_equilibrium,
    stability_report,
    stability_reports,
)
from .distributions import (
    density,
    inverse_tail,
    std_normal_cdf,
    std_normal_density,
    std_normal_quantile,
    support_minimum,
    tail_probability,
)
from .dynamics import GapDrift, Trajectory, gap_drift, simulate, step
from .errors import DomainError, FairdynError, ScenarioError, SolverError
from .montecarlo import (
    Population,
    TrialOutcome,
    TrialSummary,
    aggregate_trials,
    run_trial,
    run_trials,
    sample_population,
    summarize_trials,
)
from .scenario import (
    DistributionSpec,
    Family,
    Policy,
    Scenario,
    load_scenario,
    parse_scenario,
    serialize_scenario,
)
from .threshold import (
    GroupState,
    ParetoClosedForm,
    ThresholdSolution,
    dp_thresholds,
    pareto_closed_form_threshold,
    solve_for_policy,
    solve_shared_threshold,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
