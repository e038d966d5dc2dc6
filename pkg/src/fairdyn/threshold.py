"""Acceptance-threshold solvers.

Under a shared threshold the cutoff theta solves
    m_c * tail(mu_c, theta) + m_nc * tail(mu_nc, theta) = n,
a non-increasing equation handled by bracketed bisection with a
regula-falsi acceleration step. Under demographic parity both groups get
the acceptance rate n/m exactly and per-group thresholds via the inverse
tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .distributions import inverse_tail, support_minimum, tail_probability
from .errors import DomainError, SolverError
from .scenario import Family, Policy, Scenario

SOLVER_REL_TOL = 1e-9
SOLVER_MAX_ITER = 200
GAUSSIAN_BRACKET_SIGMAS = 12.0


@dataclass(frozen=True)
class GroupState:
    """Current mean scores (mu_c, mu_nc); both finite and >= 0."""

    mu_c: float
    mu_nc: float

    def __post_init__(self):
        for name, value in (("mu_c", self.mu_c), ("mu_nc", self.mu_nc)):
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value >= 0.0):
                raise DomainError(f"{name} must be finite and >= 0, got {value!r}")

    def as_tuple(self) -> tuple[float, float]:
        return (float(self.mu_c), float(self.mu_nc))


@dataclass(frozen=True)
class ThresholdSolution:
    """Solved threshold(s) with the resulting acceptance probabilities.

    theta_c == theta_nc under the shared policy. residual is
    |m_c * P_c + m_nc * P_nc - n|.
    """

    theta_c: float
    theta_nc: float
    P_c: float
    P_nc: float
    residual: float
    policy: Policy
    flags: tuple[str, ...] = ()

    @property
    def theta(self) -> float:
        return self.theta_c


def _expected_total(s: Scenario, x: GroupState, theta: float) -> float:
    spec = s.distribution
    return (s.m_c * tail_probability(spec, x.mu_c, theta)
            + s.m_nc * tail_probability(spec, x.mu_nc, theta))


def _bracket_low(s: Scenario, x: GroupState) -> float:
    spec = s.distribution
    lows = []
    for mu in x.as_tuple():
        if mu == 0.0:
            lows.append(0.0)
        elif spec.family is Family.GAUSSIAN:
            lows.append(mu - GAUSSIAN_BRACKET_SIGMAS * spec.sigma)
        else:
            lows.append(support_minimum(spec, mu))
    return min(lows)


def solve_shared_threshold(s: Scenario, x: GroupState) -> ThresholdSolution:
    """Solve the shared cutoff so expected acceptances equal the capacity n.

    Raises SolverError when both means are zero or the search fails to
    bracket and converge.
    """
    if x.mu_c == 0.0 and x.mu_nc == 0.0:
        raise SolverError("threshold undefined: both group means are zero")
    n = float(s.n)
    tol = SOLVER_REL_TOL * n
    total = lambda theta: _expected_total(s, x, theta)

    lo = _bracket_low(s, x)
    t_lo = total(lo)
    if t_lo < n - tol:
        raise SolverError(
            f"cannot bracket threshold: expected total {t_lo} below n at the support minimum",
            bracket=(lo, lo),
        )
    hi = max(x.mu_c, x.mu_nc, lo + 1.0)
    t_hi = total(hi)
    for _ in range(200):
        if t_hi < n:
            break
        hi = lo + 2.0 * (hi - lo)
        t_hi = total(hi)
    else:
        raise SolverError("cannot bracket threshold from above", bracket=(lo, hi))

    # Bisection keeps the bracket honest; one regula-falsi point per round
    # accelerates convergence on smooth stretches. The loop polishes well
    # past the contract tolerance while iterations remain, and the best
    # point seen wins.
    a, b, t_a, t_b = lo, hi, t_lo, t_hi
    theta, err = a, abs(t_a - n)
    polish = 1e-13 * n
    for _ in range(SOLVER_MAX_ITER):
        mid = 0.5 * (a + b)
        t_mid = total(mid)
        if abs(t_mid - n) < err:
            theta, err = mid, abs(t_mid - n)
        if err <= polish:
            break
        if t_mid >= n:
            a, t_a = mid, t_mid
        else:
            b, t_b = mid, t_mid
        if t_a > t_b:
            rf = a + (t_a - n) * (b - a) / (t_a - t_b)
            if a < rf < b:
                t_rf = total(rf)
                if abs(t_rf - n) < err:
                    theta, err = rf, abs(t_rf - n)
                if err <= polish:
                    break
                if t_rf >= n:
                    a, t_a = rf, t_rf
                else:
                    b, t_b = rf, t_rf
        if b - a <= 1e-15 * max(1.0, abs(b)):
            break
    if err > tol:
        raise SolverError(
            f"threshold solver did not converge: |T - n| = {err}",
            bracket=(a, b),
            residual=err,
        )

    spec = s.distribution
    P_c = tail_probability(spec, x.mu_c, theta)
    P_nc = tail_probability(spec, x.mu_nc, theta)
    flags = []
    if x.mu_c == 0.0:
        flags.append("protected_mean_zero")
    if x.mu_nc == 0.0:
        flags.append("nonprotected_mean_zero")
    return ThresholdSolution(
        theta_c=theta, theta_nc=theta, P_c=P_c, P_nc=P_nc,
        residual=abs(s.m_c * P_c + s.m_nc * P_nc - n),
        policy=Policy.SHARED, flags=tuple(flags),
    )


def dp_thresholds(s: Scenario, x: GroupState) -> ThresholdSolution:
    """Group-specific thresholds enforcing the equal acceptance rate n/m.

    A zero-mean group cannot actually reach a positive rate; it gets the
    support-minimum threshold, a flag, and the rate n/m is still applied
    (the update uses probabilities, not thresholds).
    """
    spec = s.distribution
    P = s.n / s.m
    flags = []
    thetas = []
    for name, mu in (("protected", x.mu_c), ("nonprotected", x.mu_nc)):
        if mu == 0.0:
            thetas.append(support_minimum(spec, mu))
            flags.append(f"dp_rate_unreachable_{name}")
        else:
            thetas.append(inverse_tail(spec, mu, P))
    return ThresholdSolution(
        theta_c=thetas[0], theta_nc=thetas[1], P_c=P, P_nc=P,
        residual=abs(s.m_c * P + s.m_nc * P - s.n),
        policy=Policy.DP, flags=tuple(flags),
    )


def solve_for_policy(s: Scenario, x: GroupState) -> ThresholdSolution:
    if s.policy is Policy.DP:
        return dp_thresholds(s, x)
    return solve_shared_threshold(s, x)


@dataclass(frozen=True)
class ParetoClosedForm:
    """Closed-form shared threshold and probabilities for the Pareto family.

    valid is False when the formula's premise theta >= both support minima
    fails; the numbers are still reported for inspection.
    """

    theta: float
    P_c: float
    P_nc: float
    valid: bool


def pareto_closed_form_threshold(s: Scenario, x: GroupState) -> ParetoClosedForm:
    """Evaluate the closed-form Pareto threshold and group probabilities.

    Serves as an independent oracle for solve_shared_threshold wherever the
    validity check passes.
    """
    spec = s.distribution
    if spec.family is not Family.PARETO:
        raise DomainError(f"closed form requires the pareto family, got {spec.family.value}")
    if x.mu_c == 0.0 and x.mu_nc == 0.0:
        raise SolverError("threshold undefined: both group means are zero")
    k = spec.k
    weighted = s.m_c * x.mu_c ** k + s.m_nc * x.mu_nc ** k
    theta = (k - 1.0) / k * (weighted / s.n) ** (1.0 / k)
    P_c = s.n * x.mu_c ** k / weighted
    P_nc = s.n * x.mu_nc ** k / weighted
    valid = True
    for mu in x.as_tuple():
        if mu > 0.0 and theta < support_minimum(spec, mu) * (1.0 - 1e-12):
            valid = False
    return ParetoClosedForm(theta=theta, P_c=P_c, P_nc=P_nc, valid=valid)
