"""One-step update map, trajectory simulation, and the score-gap drift law.

Each step the group means decay by the leak rate and gain beta times the
group's acceptance probability:
    mu' = (1 - alpha) * mu + beta * P
with (P_c, P_nc) solved per the scenario's fairness policy.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

from .errors import FairdynError
from .scenario import Scenario
from .threshold import GroupState, ThresholdSolution, solve_for_policy

DIVERGENCE_GUARD = 1e12


def step_with_solution(s: Scenario, x: GroupState) -> tuple[GroupState, ThresholdSolution]:
    sol = solve_for_policy(s, x)
    return apply_update(s, x, sol), sol


def apply_update(s: Scenario, x: GroupState, sol: ThresholdSolution) -> GroupState:
    return GroupState(
        mu_c=(1.0 - s.alpha) * x.mu_c + s.beta * sol.P_c,
        mu_nc=(1.0 - s.alpha) * x.mu_nc + s.beta * sol.P_nc,
    )


def step(s: Scenario, x: GroupState) -> GroupState:
    """Advance the group means by one time step."""
    return step_with_solution(s, x)[0]


@dataclass(frozen=True)
class TrajectoryRecord:
    t: int
    mu_c: float
    mu_nc: float
    theta_c: float
    theta_nc: float
    P_c: float
    P_nc: float

    @property
    def eta(self) -> float:
        """Score gap mu_nc - mu_c."""
        return self.mu_nc - self.mu_c

    @property
    def state(self) -> GroupState:
        return GroupState(self.mu_c, self.mu_nc)


@dataclass(frozen=True)
class Trajectory:
    records: tuple[TrajectoryRecord, ...]
    converged: bool
    converged_at: int | None
    diverged: bool = False

    @property
    def final_state(self) -> GroupState:
        return self.records[-1].state


def simulate(s: Scenario, x0: GroupState, max_steps: int = 1000, tol: float = 1e-9) -> Trajectory:
    """Iterate the step map, recording state, thresholds, and probabilities.

    Convergence is a max-norm step change below tol; iteration aborts if a
    mean exceeds the divergence guard.
    """
    if max_steps < 1:
        raise FairdynError(f"max_steps must be >= 1, got {max_steps}")
    if not tol > 0:
        raise FairdynError(f"tol must be > 0, got {tol}")

    x = x0
    sol = solve_for_policy(s, x)
    records = [_record(0, x, sol)]
    converged = False
    converged_at = None
    diverged = False
    for t in range(1, max_steps + 1):
        x_next = apply_update(s, x, sol)
        sol = solve_for_policy(s, x_next)
        records.append(_record(t, x_next, sol))
        if max(x_next.mu_c, x_next.mu_nc) > DIVERGENCE_GUARD:
            diverged = True
            break
        delta = max(abs(x_next.mu_c - x.mu_c), abs(x_next.mu_nc - x.mu_nc))
        x = x_next
        if delta < tol:
            converged = True
            converged_at = t
            break
    return Trajectory(tuple(records), converged, converged_at, diverged)


def _record(t: int, x: GroupState, sol: ThresholdSolution) -> TrajectoryRecord:
    return TrajectoryRecord(
        t=t, mu_c=x.mu_c, mu_nc=x.mu_nc,
        theta_c=sol.theta_c, theta_nc=sol.theta_nc,
        P_c=sol.P_c, P_nc=sol.P_nc,
    )


STATIONARY_BAND = 1e-12

GROWS = "grows"
SHRINKS = "shrinks"
STATIONARY = "stationary"


@dataclass(frozen=True)
class GapDrift:
    """Signed one-step change of the score gap and its verdict.

    value = beta * (P_nc - P_c) - alpha * eta; the gap grows exactly when
    this is positive and shrinks exactly when it is negative.
    """

    value: float
    verdict: str


def gap_drift(s: Scenario, x: GroupState) -> GapDrift:
    sol = solve_for_policy(s, x)
    eta = x.mu_nc - x.mu_c
    value = s.beta * (sol.P_nc - sol.P_c) - s.alpha * eta
    if value > STATIONARY_BAND:
        verdict = GROWS
    elif value < -STATIONARY_BAND:
        verdict = SHRINKS
    else:
        verdict = STATIONARY
    return GapDrift(value=value, verdict=verdict)


TRAJECTORY_CSV_HEADER = "t,mu_c,mu_nc,theta_c,theta_nc,P_c,P_nc,eta"


def fmt(x: float) -> str:
    """Shortest decimal that round-trips the float (>= 12 significant digits
    whenever they matter)."""
    return repr(float(x))


def write_trajectory_csv(traj: Trajectory, fh: io.TextIOBase) -> None:
    fh.write(TRAJECTORY_CSV_HEADER + "\n")
    for r in traj.records:
        fh.write(",".join([
            str(r.t), fmt(r.mu_c), fmt(r.mu_nc), fmt(r.theta_c), fmt(r.theta_nc),
            fmt(r.P_c), fmt(r.P_nc), fmt(r.eta),
        ]) + "\n")
