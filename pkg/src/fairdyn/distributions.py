"""Mean-parameterized score distributions.

Closed-form upper-tail probabilities P(q >= theta), densities, and inverse
tails for the exponential, Pareto, and Gaussian families, each keyed by its
mean, plus the standard-normal special functions the Gaussian case needs.

Conventions:
  * mean 0 is treated as the degenerate point mass at 0: tail is 1 for
    theta <= 0 and 0 for theta > 0. The axis equilibria of the dynamics sit
    exactly on this limit, so it is a convention, not an error.
  * the Pareto family is mean-parameterized; its scale x_m = (k-1)/k * mean
    stays internal.
"""

from __future__ import annotations

import math

from .errors import DomainError
from .scenario import DistributionSpec, Family

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def std_normal_cdf(x: float) -> float:
    """Phi(x) via the complementary error function (stdlib erfc)."""
    return 0.5 * math.erfc(-x / _SQRT2)


def std_normal_density(x: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


# Acklam's rational approximation for the standard normal quantile,
# |relative error| < 1.15e-9 before refinement.
_ACKLAM_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
             1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_ACKLAM_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
             6.680131188771972e+01, -1.328068155288572e+01)
_ACKLAM_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
             -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_ACKLAM_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
             3.754408661907416e+00)
_P_LOW = 0.02425


def std_normal_quantile(p: float) -> float:
    """Phi^-1(p): Acklam's initial estimate polished by Halley steps.

    Satisfies |Phi(Phi^-1(p)) - p| at machine-precision level for p in (0,1).
    """
    if not 0.0 < p < 1.0:
        raise DomainError(f"quantile requires 0 < p < 1, got {p}")
    a, b, c, d = _ACKLAM_A, _ACKLAM_B, _ACKLAM_C, _ACKLAM_D
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    elif p > 1.0 - _P_LOW:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    else:
        q = p - 0.5
        r = q * q
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    for _ in range(2):
        err = std_normal_cdf(x) - p
        if err == 0.0:
            break
        try:
            u = err * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
        except OverflowError:
            break
        if not math.isfinite(u):
            break
        x = x - u / (1.0 + 0.5 * x * u)
    return x


def _check_spec(spec: DistributionSpec) -> None:
    # DistributionSpec validates at construction; this guards hand-built ones.
    if spec.family is Family.PARETO and not (spec.k is not None and spec.k > 1):
        raise DomainError(f"pareto requires k > 1, got {spec.k}")
    if spec.family is Family.GAUSSIAN and not (spec.sigma is not None and spec.sigma > 0):
        raise DomainError(f"gaussian requires sigma > 0, got {spec.sigma}")


def support_minimum(spec: DistributionSpec, mean: float) -> float:
    """Smallest score with positive density (the point mass 0 for mean 0)."""
    _check_spec(spec)
    if mean == 0.0:
        return 0.0
    if spec.family is Family.EXPONENTIAL:
        return 0.0
    if spec.family is Family.PARETO:
        return (spec.k - 1.0) / spec.k * mean
    return -math.inf


def tail_probability(spec: DistributionSpec, mean: float, theta: float) -> float:
    """P(q >= theta) for a score q with the given family and mean, in [0, 1]."""
    _check_spec(spec)
    if not (mean >= 0.0 and math.isfinite(mean)):
        raise DomainError(f"mean must be finite and >= 0, got {mean}")
    if mean == 0.0:
        return 1.0 if theta <= 0.0 else 0.0
    if spec.family is Family.EXPONENTIAL:
        if theta <= 0.0:
            return 1.0
        return math.exp(-theta / mean)
    if spec.family is Family.PARETO:
        x_min = (spec.k - 1.0) / spec.k * mean
        if theta <= x_min:
            return 1.0
        return (x_min / theta) ** spec.k
    # Gaussian: 1 - Phi((theta - mean) / sigma), computed as an upper tail.
    return 0.5 * math.erfc((theta - mean) / (spec.sigma * _SQRT2))


def inverse_tail(spec: DistributionSpec, mean: float, P: float) -> float:
    """theta such that tail_probability(spec, mean, theta) == P.

    Requires mean > 0 and 0 < P <= 1; P == 1 returns the support minimum.
    """
    _check_spec(spec)
    if not mean > 0.0:
        raise DomainError(f"inverse tail requires mean > 0, got {mean}")
    if not 0.0 < P <= 1.0:
        raise DomainError(f"tail probability must be in (0, 1], got {P}")
    if P == 1.0:
        return support_minimum(spec, mean)
    if spec.family is Family.EXPONENTIAL:
        return -mean * math.log(P)
    if spec.family is Family.PARETO:
        return (spec.k - 1.0) / spec.k * mean * P ** (-1.0 / spec.k)
    # theta = mean + sigma * Phi^-1(1 - P); the complementary form keeps
    # precision for small P.
    return mean - spec.sigma * std_normal_quantile(P)


def density(spec: DistributionSpec, mean: float, q: float) -> float:
    """Closed-form density at q; 0 outside the support."""
    _check_spec(spec)
    if not mean > 0.0:
        raise DomainError(f"density requires mean > 0, got {mean}")
    if spec.family is Family.EXPONENTIAL:
        if q < 0.0:
            return 0.0
        return math.exp(-q / mean) / mean
    if spec.family is Family.PARETO:
        k = spec.k
        x_min = (k - 1.0) / k * mean
        if q < x_min:
            return 0.0
        return k * x_min ** k / q ** (k + 1.0)
    return std_normal_density((q - mean) / spec.sigma) / spec.sigma
