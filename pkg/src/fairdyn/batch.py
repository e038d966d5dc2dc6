"""Vectorized threshold solving and stepping over arrays of states.

Grid workloads (basin maps, phase fields) advance hundreds of states per
step; this module mirrors the scalar formulas in distributions/threshold
with numpy array arithmetic. Cross-checked against the scalar path in the
test suite.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erfc

from .scenario import Family, Policy, Scenario
from .threshold import GAUSSIAN_BRACKET_SIGMAS

_SQRT2 = np.sqrt(2.0)


def tail_array(s: Scenario, means: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    """Elementwise upper-tail probabilities, honoring the mean-0 convention."""
    spec = s.distribution
    means = np.asarray(means, dtype=float)
    thetas = np.asarray(thetas, dtype=float)
    degenerate = means == 0.0
    if spec.family is Family.EXPONENTIAL:
        safe = np.where(degenerate, 1.0, means)
        with np.errstate(over="ignore"):
            out = np.where(thetas <= 0.0, 1.0, np.exp(-np.maximum(thetas, 0.0) / safe))
    elif spec.family is Family.PARETO:
        k = spec.k
        x_min = (k - 1.0) / k * means
        safe_theta = np.maximum(thetas, np.where(x_min > 0, x_min, 1.0))
        out = np.where(thetas <= x_min, 1.0, (x_min / safe_theta) ** k)
    else:
        out = 0.5 * erfc((thetas - means) / (spec.sigma * _SQRT2))
    return np.where(degenerate, np.where(thetas <= 0.0, 1.0, 0.0), out)


def _expected_total(s: Scenario, mu_c, mu_nc, theta) -> np.ndarray:
    return s.m_c * tail_array(s, mu_c, theta) + s.m_nc * tail_array(s, mu_nc, theta)


def solve_shared_array(s: Scenario, mu_c: np.ndarray, mu_nc: np.ndarray):
    """Per-element shared thresholds via vector bisection.

    Returns (theta, ok); elements with both means zero get theta = nan and
    ok = False.
    """
    mu_c = np.asarray(mu_c, dtype=float)
    mu_nc = np.asarray(mu_nc, dtype=float)
    ok = ~((mu_c == 0.0) & (mu_nc == 0.0))
    n = float(s.n)

    spec = s.distribution
    if spec.family is Family.GAUSSIAN:
        lo_c = np.where(mu_c == 0.0, 0.0, mu_c - GAUSSIAN_BRACKET_SIGMAS * spec.sigma)
        lo_nc = np.where(mu_nc == 0.0, 0.0, mu_nc - GAUSSIAN_BRACKET_SIGMAS * spec.sigma)
    elif spec.family is Family.PARETO:
        lo_c = (spec.k - 1.0) / spec.k * mu_c
        lo_nc = (spec.k - 1.0) / spec.k * mu_nc
    else:
        lo_c = np.zeros_like(mu_c)
        lo_nc = np.zeros_like(mu_nc)
    lo = np.minimum(lo_c, lo_nc)

    hi = np.maximum(np.maximum(mu_c, mu_nc), lo + 1.0)
    for _ in range(200):
        too_low = ok & (_expected_total(s, mu_c, mu_nc, hi) >= n)
        if not too_low.any():
            break
        hi = np.where(too_low, lo + 2.0 * (hi - lo), hi)

    # Bisect past the contract tolerance down to the polish level the scalar
    # solver reaches, so grid exports agree with the scalar path.
    polish = 1e-13 * n
    a, b = lo.copy(), hi.copy()
    theta = 0.5 * (a + b)
    for _ in range(170):
        theta = 0.5 * (a + b)
        total = _expected_total(s, mu_c, mu_nc, theta)
        active = ok & (np.abs(total - n) > polish) & (b - a > 1e-15 * np.maximum(1.0, np.abs(b)))
        if not active.any():
            break
        go_up = total >= n
        a = np.where(active & go_up, theta, a)
        b = np.where(active & ~go_up, theta, b)
    theta = np.where(ok, theta, np.nan)
    return theta, ok


def step_array(s: Scenario, mu_c: np.ndarray, mu_nc: np.ndarray):
    """One step of the mean-update map over arrays of states.

    Returns (mu_c', mu_nc', P_c, P_nc, theta_c, theta_nc, ok).
    """
    mu_c = np.asarray(mu_c, dtype=float)
    mu_nc = np.asarray(mu_nc, dtype=float)
    if s.policy is Policy.DP:
        P = s.n / s.m
        P_c = np.full_like(mu_c, P)
        P_nc = np.full_like(mu_nc, P)
        theta_c = _dp_theta_array(s, mu_c, P)
        theta_nc = _dp_theta_array(s, mu_nc, P)
        ok = np.ones(mu_c.shape, dtype=bool)
    else:
        theta, ok = solve_shared_array(s, mu_c, mu_nc)
        P_c = np.where(ok, tail_array(s, mu_c, np.where(ok, theta, 0.0)), np.nan)
        P_nc = np.where(ok, tail_array(s, mu_nc, np.where(ok, theta, 0.0)), np.nan)
        theta_c = theta
        theta_nc = theta
    new_c = (1.0 - s.alpha) * mu_c + s.beta * P_c
    new_nc = (1.0 - s.alpha) * mu_nc + s.beta * P_nc
    return new_c, new_nc, P_c, P_nc, theta_c, theta_nc, ok


def _dp_theta_array(s: Scenario, means: np.ndarray, P: float) -> np.ndarray:
    spec = s.distribution
    degenerate = means == 0.0
    safe = np.where(degenerate, 1.0, means)
    if spec.family is Family.EXPONENTIAL:
        theta = -safe * np.log(P)
    elif spec.family is Family.PARETO:
        theta = (spec.k - 1.0) / spec.k * safe * P ** (-1.0 / spec.k)
    else:
        from .distributions import std_normal_quantile

        theta = safe - spec.sigma * std_normal_quantile(P)
    return np.where(degenerate, 0.0, theta)
