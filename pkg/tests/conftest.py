import dataclasses

import pytest

from fairdyn import DistributionSpec, Family, Policy, Scenario

DEMO_DOC = (
    '{"m_c": 100, "m_nc": 200, "n": 50, "alpha": 0.5, "beta": 5, '
    '"distribution": {"family": "exponential"}}'
)


@pytest.fixture
def demo():
    """m_c=100, m_nc=200, n=50, alpha=0.5, beta=5, exponential, shared."""
    return Scenario(m_c=100, m_nc=200, n=50, alpha=0.5, beta=5.0,
                    distribution=DistributionSpec(Family.EXPONENTIAL))


@pytest.fixture
def demo_dp(demo):
    return dataclasses.replace(demo, policy=Policy.DP)


@pytest.fixture
def compact():
    """m_c=50, m_nc=100, n=20, alpha=0.5, beta=5, exponential, shared."""
    return Scenario(m_c=50, m_nc=100, n=20, alpha=0.5, beta=5.0,
                    distribution=DistributionSpec(Family.EXPONENTIAL))


def family_scenario(family: Family, **overrides) -> Scenario:
    """Demo-scenario sizes and rates with the requested distribution family."""
    spec = {
        Family.EXPONENTIAL: DistributionSpec(Family.EXPONENTIAL),
        Family.PARETO: DistributionSpec(Family.PARETO, k=2.0),
        Family.GAUSSIAN: DistributionSpec(Family.GAUSSIAN, sigma=0.5),
    }[family]
    base = dict(m_c=100, m_nc=200, n=50, alpha=0.5, beta=5.0,
                distribution=spec, policy=Policy.SHARED)
    base.update(overrides)
    return Scenario(**base)


@pytest.fixture
def demo_file(tmp_path):
    path = tmp_path / "demo.json"
    path.write_text(DEMO_DOC)
    return path
