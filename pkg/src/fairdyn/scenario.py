"""Immutable model configuration shared by all analyses.

A scenario fixes the two group sizes, the per-step capacity n, the leak
rate alpha, the per-acceptance gain beta, the score distribution family,
and the fairness policy. Construction validates everything; a Scenario
that exists is safe to share across threads.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

from .errors import ScenarioError


class Family(str, enum.Enum):
    EXPONENTIAL = "exponential"
    PARETO = "pareto"
    GAUSSIAN = "gaussian"


class Policy(str, enum.Enum):
    SHARED = "shared"
    DP = "dp"


@dataclass(frozen=True)
class DistributionSpec:
    """Score distribution family plus its shape parameter, if any.

    Shape fields are accepted exactly when their family needs them:
    ``k`` (> 1) for Pareto, ``sigma`` (> 0) for Gaussian.
    """

    family: Family
    k: float | None = None
    sigma: float | None = None

    def __post_init__(self):
        if not isinstance(self.family, Family):
            raise ScenarioError("distribution.family", f"unknown family {self.family!r}")
        if self.family is Family.PARETO:
            if self.k is None:
                raise ScenarioError("distribution.k", "required for the pareto family")
            _require_real("distribution.k", self.k)
            if not self.k > 1:
                raise ScenarioError("distribution.k", f"must be > 1, got {self.k}")
        elif self.k is not None:
            raise ScenarioError("distribution.k", f"only valid for the pareto family, not {self.family.value}")
        if self.family is Family.GAUSSIAN:
            if self.sigma is None:
                raise ScenarioError("distribution.sigma", "required for the gaussian family")
            _require_real("distribution.sigma", self.sigma)
            if not self.sigma > 0:
                raise ScenarioError("distribution.sigma", f"must be > 0, got {self.sigma}")
        elif self.sigma is not None:
            raise ScenarioError("distribution.sigma", f"only valid for the gaussian family, not {self.family.value}")

    @property
    def infinite_variance(self) -> bool:
        """Pareto with k <= 2 has infinite variance; allowed but flagged."""
        return self.family is Family.PARETO and self.k is not None and self.k <= 2


@dataclass(frozen=True)
class Scenario:
    """Validated, immutable model parameters.

    The total population m is always derived from the group sizes, never
    stored, so it cannot go out of sync.
    """

    m_c: int
    m_nc: int
    n: int
    alpha: float
    beta: float
    distribution: DistributionSpec
    policy: Policy = Policy.SHARED

    def __post_init__(self):
        _require_count("m_c", self.m_c)
        _require_count("m_nc", self.m_nc)
        _require_count("n", self.n)
        if self.n >= self.m_c + self.m_nc:
            raise ScenarioError("n", f"n exceeds population (n={self.n}, m={self.m_c + self.m_nc})")
        _require_real("alpha", self.alpha)
        if not 0.0 <= self.alpha <= 1.0:
            raise ScenarioError("alpha", f"alpha out of [0,1], got {self.alpha}")
        _require_real("beta", self.beta)
        if not self.beta > 0:
            raise ScenarioError("beta", f"must be > 0, got {self.beta}")
        if not isinstance(self.distribution, DistributionSpec):
            raise ScenarioError("distribution", "must be a DistributionSpec")
        if not isinstance(self.policy, Policy):
            raise ScenarioError("policy", f"unknown policy {self.policy!r}")

    @property
    def m(self) -> int:
        return self.m_c + self.m_nc

    @property
    def capacity_warning(self) -> bool:
        """True when n is not small against the protected group (n >= m_c/5).

        The expected-count approximation rests on acceptances being rare;
        this flags scenarios where that assumption is getting thin.
        """
        return self.n >= self.m_c / 5

    def flags(self) -> tuple[str, ...]:
        out = []
        if self.capacity_warning:
            out.append("capacity_not_small_vs_protected_group")
        if self.distribution.infinite_variance:
            out.append("pareto_infinite_variance")
        return tuple(out)


_TOP_KEYS = {"m_c", "m_nc", "n", "alpha", "beta", "distribution", "policy"}
_DIST_KEYS = {"family", "k", "sigma"}


def parse_scenario(document: str) -> Scenario:
    """Parse a JSON scenario document into a validated Scenario.

    Unknown keys are rejected; every error names the offending field.
    ``policy`` defaults to "shared".
    """
    try:
        raw = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ScenarioError("document", f"not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ScenarioError("document", "top level must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ScenarioError(sorted(unknown)[0], "unknown key")
    for key in ("m_c", "m_nc", "n", "alpha", "beta", "distribution"):
        if key not in raw:
            raise ScenarioError(key, "missing required key")

    dist_raw = raw["distribution"]
    if not isinstance(dist_raw, dict):
        raise ScenarioError("distribution", "must be a JSON object")
    unknown = set(dist_raw) - _DIST_KEYS
    if unknown:
        raise ScenarioError(f"distribution.{sorted(unknown)[0]}", "unknown key")
    if "family" not in dist_raw:
        raise ScenarioError("distribution.family", "missing required key")
    try:
        family = Family(dist_raw["family"])
    except ValueError:
        raise ScenarioError(
            "distribution.family",
            f"must be one of {[f.value for f in Family]}, got {dist_raw['family']!r}",
        ) from None
    dist = DistributionSpec(family=family, k=dist_raw.get("k"), sigma=dist_raw.get("sigma"))

    policy_raw = raw.get("policy", "shared")
    try:
        policy = Policy(policy_raw)
    except ValueError:
        raise ScenarioError(
            "policy", f"must be one of {[p.value for p in Policy]}, got {policy_raw!r}"
        ) from None

    return Scenario(
        m_c=_as_count("m_c", raw["m_c"]),
        m_nc=_as_count("m_nc", raw["m_nc"]),
        n=_as_count("n", raw["n"]),
        alpha=_as_real("alpha", raw["alpha"]),
        beta=_as_real("beta", raw["beta"]),
        distribution=dist,
        policy=policy,
    )


def serialize_scenario(s: Scenario) -> str:
    """Canonical JSON for a Scenario; parse(serialize(s)) == s."""
    dist: dict = {"family": s.distribution.family.value}
    if s.distribution.k is not None:
        dist["k"] = s.distribution.k
    if s.distribution.sigma is not None:
        dist["sigma"] = s.distribution.sigma
    doc = {
        "m_c": s.m_c,
        "m_nc": s.m_nc,
        "n": s.n,
        "alpha": s.alpha,
        "beta": s.beta,
        "distribution": dist,
        "policy": s.policy.value,
    }
    return json.dumps(doc, indent=2)


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def _require_count(field: str, value) -> None:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(field, f"must be an integer, got {value!r}")
    if value <= 0:
        raise ScenarioError(field, f"must be a positive integer, got {value}")


def _require_real(field: str, value) -> None:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(field, f"must be a number, got {value!r}")
    if value != value or value in (float("inf"), float("-inf")):
        raise ScenarioError(field, f"must be finite, got {value}")


def _as_count(field: str, value) -> int:
    _require_count(field, value)
    return value


def _as_real(field: str, value) -> float:
    _require_real(field, value)
    return float(value)
