"""Equilibria, Jacobians, eigenvalues, stability verdicts, and grid exports.

The shared-threshold system has three fixed points: two on the axes where
one group's mean is zero, and one on the diagonal where both groups share
the acceptance rate n/m. Demographic parity collapses these to the single
diagonal point. Stability is judged from 2x2 Jacobians, computed both by
finite differences of the actual map and from closed forms.

Two finite-difference modes exist because the closed-form analyses at the
desirable point perturb the means while holding the threshold fixed,
whereas the real coupled map re-solves the threshold after any
perturbation. Verdicts for the coupled system use the full mode;
closed-form reproduction uses the frozen mode.
"""

from __future__ import annotations

import enum
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import batch
from .distributions import std_normal_density, std_normal_quantile, tail_probability
from .dynamics import fmt, step
from .errors import DomainError, SolverError
from .scenario import Family, Policy, Scenario
from .threshold import GroupState, solve_for_policy

EQUILIBRIUM_RESIDUAL_TOL = 1e-8
CLASSIFY_BAND = 1e-6
PARETO_EPSILON = 1e-12

STABLE = "stable"
UNSTABLE = "unstable"
MARGINAL = "marginal"


class EquilibriumLabel(str, enum.Enum):
    UNDESIRABLE_PROTECTED_ZERO = "undesirable_protected_zero"
    UNDESIRABLE_NONPROTECTED_ZERO = "undesirable_nonprotected_zero"
    DESIRABLE = "desirable"
    DP_UNIQUE = "dp_unique"


@dataclass(frozen=True)
class Equilibrium:
    point: GroupState
    label: EquilibriumLabel
    source: str  # "analytic" | "refined"
    residual: float


def _verification_state(s: Scenario, point: GroupState) -> GroupState:
    # The Pareto density is ill-defined at mean 0; verify at a mean eps
    # close to zero instead.
    if s.distribution.family is Family.PARETO:
        return GroupState(
            mu_c=point.mu_c if point.mu_c > 0.0 else PARETO_EPSILON,
            mu_nc=point.mu_nc if point.mu_nc > 0.0 else PARETO_EPSILON,
        )
    return point


def _step_residual(s: Scenario, point: GroupState) -> float:
    v = _verification_state(s, point)
    nxt = step(s, v)
    return max(abs(nxt.mu_c - v.mu_c), abs(nxt.mu_nc - v.mu_nc))


def analytic_equilibria(s: Scenario) -> list[Equilibrium]:
    """Closed-form fixed points of the update map, verified by one step.

    Shared policy: (0, b/a * n/m_nc), (b/a * n/m_c, 0), and the diagonal
    point b/a * n/m. Demographic parity: the diagonal point only. An axis
    point exists only when the surviving group can absorb all n acceptances
    (its rate n/m_g cannot exceed 1); outside that regime the closed form
    is not a fixed point and is omitted.
    """
    if s.alpha == 0.0:
        raise SolverError("alpha = 0: the map mu' = mu + beta*P has no equilibria for beta > 0")
    scale = s.beta / s.alpha
    if s.policy is Policy.DP:
        mu = scale * s.n / s.m
        candidates = [(GroupState(mu, mu), EquilibriumLabel.DP_UNIQUE)]
    else:
        mu_d = scale * s.n / s.m
        candidates = []
        if s.n <= s.m_nc:
            candidates.append((GroupState(0.0, scale * s.n / s.m_nc),
                               EquilibriumLabel.UNDESIRABLE_PROTECTED_ZERO))
        if s.n <= s.m_c:
            candidates.append((GroupState(scale * s.n / s.m_c, 0.0),
                               EquilibriumLabel.UNDESIRABLE_NONPROTECTED_ZERO))
        candidates.append((GroupState(mu_d, mu_d), EquilibriumLabel.DESIRABLE))
    return [
        Equilibrium(point=p, label=lab, source="analytic", residual=_step_residual(s, p))
        for p, lab in candidates
    ]


def refine_equilibrium(s: Scenario, guess: GroupState, tol: float = 1e-9,
                       max_iter: int = 10_000) -> Equilibrium:
    """Damped fixed-point iteration x <- x + gamma * (step(x) - x).

    gamma adapts within (0, 1]: halved when the residual grows, nudged back
    up after sustained progress. Labels the result by the nearest analytic
    equilibrium. Raises SolverError with the last iterate on failure.
    """
    if not tol > 0:
        raise DomainError(f"tol must be > 0, got {tol}")
    anchors = analytic_equilibria(s)
    x = guess
    gamma = 1.0
    prev_residual = math.inf
    improved = 0
    residual = math.inf
    for _ in range(max_iter):
        fx = step(s, x)
        residual = max(abs(fx.mu_c - x.mu_c), abs(fx.mu_nc - x.mu_nc))
        # Near a contraction with rate rho, the distance to the fixed point
        # is about residual / (1 - rho); estimate rho from the residual
        # ratio so the returned point itself honors tol.
        rho = min(residual / prev_residual, 0.9) if prev_residual > 0 else 0.0
        if residual < tol * (1.0 - rho) or residual == 0.0:
            nearest = min(
                anchors,
                key=lambda e: max(abs(e.point.mu_c - x.mu_c), abs(e.point.mu_nc - x.mu_nc)),
            )
            return Equilibrium(point=x, label=nearest.label, source="refined", residual=residual)
        if residual > prev_residual:
            gamma = max(gamma * 0.5, 1.0 / 64.0)
            improved = 0
        else:
            improved += 1
            if improved >= 8:
                gamma = min(1.0, gamma * 1.5)
                improved = 0
        prev_residual = residual
        x = GroupState(
            mu_c=x.mu_c + gamma * (fx.mu_c - x.mu_c),
            mu_nc=x.mu_nc + gamma * (fx.mu_nc - x.mu_nc),
        )
    raise SolverError(
        f"fixed-point refinement did not converge within {max_iter} iterations",
        last=x, residual=residual,
    )


FD_FULL = "full"
FD_THETA_FROZEN = "theta_frozen"


def fd_jacobian(s: Scenario, x: GroupState, mode: str = FD_FULL,
                h: float | None = None) -> np.ndarray:
    """Finite-difference Jacobian of the step map at x.

    mode "full" re-solves the threshold at every perturbed state; mode
    "theta_frozen" keeps the threshold(s) solved at x and recomputes only
    the tails. Central differences, falling back to forward differences on
    a coordinate pinned at the boundary mu = 0.
    """
    if mode not in (FD_FULL, FD_THETA_FROZEN):
        raise DomainError(f"unknown Jacobian mode {mode!r}")
    if h is not None and not h > 0:
        raise DomainError(f"h must be > 0, got {h}")

    if mode == FD_FULL:
        f = lambda state: step(s, state)
    else:
        frozen = solve_for_policy(s, x)
        spec = s.distribution

        def f(state: GroupState) -> GroupState:
            if s.policy is Policy.DP:
                P_c = P_nc = s.n / s.m
            else:
                P_c = tail_probability(spec, state.mu_c, frozen.theta_c)
                P_nc = tail_probability(spec, state.mu_nc, frozen.theta_nc)
            return GroupState(
                mu_c=(1.0 - s.alpha) * state.mu_c + s.beta * P_c,
                mu_nc=(1.0 - s.alpha) * state.mu_nc + s.beta * P_nc,
            )

    base = x.as_tuple()
    J = np.empty((2, 2))
    for j in range(2):
        hj = h if h is not None else max(1e-6, 1e-6 * abs(base[j]))
        up = list(base)
        up[j] += hj
        if base[j] - hj >= 0.0:
            dn = list(base)
            dn[j] -= hj
            fu, fd_ = f(GroupState(*up)), f(GroupState(*dn))
            J[0, j] = (fu.mu_c - fd_.mu_c) / (2.0 * hj)
            J[1, j] = (fu.mu_nc - fd_.mu_nc) / (2.0 * hj)
        else:
            fu, f0 = f(GroupState(*up)), f(x)
            J[0, j] = (fu.mu_c - f0.mu_c) / hj
            J[1, j] = (fu.mu_nc - f0.mu_nc) / hj
    return J


def analytic_jacobian(s: Scenario, e: Equilibrium) -> np.ndarray | None:
    """Closed-form Jacobian at an analytic equilibrium.

    Axis points and the demographic-parity point: (1 - alpha) * I for every
    family. Desirable shared point: the threshold-frozen diagonal forms for
    the exponential and Gaussian families; for Pareto the coupled map has a
    closed form because the threshold is eliminable, giving a full matrix
    (eigenvalues 1 - alpha and 1 - alpha + alpha*k).
    """
    a = s.alpha
    if e.label is not EquilibriumLabel.DESIRABLE:
        return np.diag([1.0 - a, 1.0 - a])
    family = s.distribution.family
    ratio = s.n / s.m
    if family is Family.EXPONENTIAL:
        lam = 1.0 - a - a * math.log(ratio)
        return np.diag([lam, lam])
    if family is Family.GAUSSIAN:
        # d/dmu of beta * (1 - Phi((theta - mu)/sigma)) at fixed theta is
        # +beta * N(theta | mu, sigma): the feedback term enters with a
        # plus sign, which finite differences confirm.
        lam = 1.0 - a + (s.beta / s.distribution.sigma) * std_normal_density(
            std_normal_quantile(1.0 - ratio))
        return np.diag([lam, lam])
    k = s.distribution.k
    w_c = a * k * s.m_c / s.m
    w_nc = a * k * s.m_nc / s.m
    return np.array([[1.0 - a + w_nc, -w_nc],
                     [-w_c, 1.0 - a + w_c]])


def pareto_frozen_gain(s: Scenario) -> float:
    """Diagonal of the threshold-frozen Jacobian at the Pareto desirable
    point: d/dmu of beta * tail at fixed theta evaluates to alpha * k."""
    if s.distribution.family is not Family.PARETO:
        raise DomainError("requires the pareto family")
    return 1.0 - s.alpha + s.alpha * s.distribution.k


def eigen2(M) -> tuple[complex, complex]:
    """Eigenvalues of a real 2x2 matrix, by descending magnitude.

    Roots of lambda^2 - tr*lambda + det, using the (a-d)^2 + 4bc form of
    the discriminant and root pairing via det to avoid cancellation.
    """
    M = np.asarray(M, dtype=float)
    if M.shape != (2, 2) or not np.isfinite(M).all():
        raise DomainError("eigen2 requires a finite 2x2 matrix")
    a, b = float(M[0, 0]), float(M[0, 1])
    c, d = float(M[1, 0]), float(M[1, 1])
    tr = a + d
    det = a * d - b * c
    disc = (a - d) ** 2 + 4.0 * b * c
    if disc >= 0.0:
        root = math.sqrt(disc)
        if tr >= 0.0:
            l1 = 0.5 * (tr + root)
        else:
            l1 = 0.5 * (tr - root)
        l2 = det / l1 if l1 != 0.0 else 0.0
        pair = (complex(l1), complex(l2))
    else:
        root = math.sqrt(-disc)
        pair = (complex(0.5 * tr, 0.5 * root), complex(0.5 * tr, -0.5 * root))
    return tuple(sorted(pair, key=lambda z: (-abs(z), -z.imag)))  # type: ignore[return-value]


def classify(eigenvalues: tuple[complex, complex], band: float = CLASSIFY_BAND) -> str:
    r = max(abs(z) for z in eigenvalues)
    if r < 1.0 - band:
        return STABLE
    if r > 1.0 + band:
        return UNSTABLE
    return MARGINAL


@dataclass(frozen=True)
class InstabilityCriterion:
    """Closed-form instability predicate for the desirable shared point.

    margin is the signed distance to the criterion boundary in its natural
    units (probability for exponential, k for Pareto, sigma for Gaussian);
    positive means the predicate holds.
    """

    family: Family
    holds: bool
    margin: float
    description: str
    details: dict = field(default_factory=dict)


def instability_condition(s: Scenario) -> InstabilityCriterion:
    family = s.distribution.family
    if family is Family.EXPONENTIAL:
        ratio = s.n / s.m
        margin = 1.0 / math.e - ratio
        return InstabilityCriterion(
            family=family, holds=ratio < 1.0 / math.e, margin=margin,
            description="n/m < 1/e",
            details={"n_over_m": ratio, "boundary": 1.0 / math.e},
        )
    if family is Family.PARETO:
        k = s.distribution.k
        root = math.sqrt(s.m_c * s.m_nc)
        b1 = s.m / (root - 1.0) if root > 1.0 else math.inf
        b2 = ((2.0 / s.alpha - 1.0) * s.m / (root + 1.0)) if s.alpha > 0.0 else math.inf
        m1, m2 = k - b1, k - b2
        return InstabilityCriterion(
            family=family, holds=(m1 > 0.0) or (m2 > 0.0), margin=max(m1, m2),
            description="k > m/(sqrt(m_c*m_nc) - 1) or k > (2/alpha - 1)*m/(sqrt(m_c*m_nc) + 1)",
            details={"k": k, "bound_upper": b1, "bound_lower": b2,
                     "margin_upper": m1, "margin_lower": m2},
        )
    sigma = s.distribution.sigma
    phi_at_cut = std_normal_density(std_normal_quantile(1.0 - s.n / s.m))
    boundary = s.beta / (2.0 - s.alpha) * phi_at_cut
    # The predicate reads off the eigenvalue form 1 - a - (b/sigma) * phi,
    # whose magnitude crosses 1 exactly at the boundary; the coupled map's
    # own gap eigenvalue is 1 - a + (b/sigma) * phi (see analytic_jacobian).
    return InstabilityCriterion(
        family=family, holds=sigma < boundary, margin=boundary - sigma,
        description="sigma < beta/(2 - alpha) * phi(Phi^-1(1 - n/m))",
        details={"sigma": sigma, "boundary": boundary,
                 "criterion_eigenvalue": 1.0 - s.alpha - (s.beta / sigma) * phi_at_cut,
                 "coupled_eigenvalue": 1.0 - s.alpha + (s.beta / sigma) * phi_at_cut},
    )


@dataclass(frozen=True)
class StabilityReport:
    equilibrium: Equilibrium
    jacobian_fd: np.ndarray
    jacobian_fd_theta_frozen: np.ndarray
    jacobian_analytic: np.ndarray | None
    eigenvalues_fd: tuple[complex, complex]
    eigenvalues_analytic: tuple[complex, complex] | None
    verdict_fd: str
    verdict_analytic: str | None
    criterion: InstabilityCriterion | None
    notes: tuple[str, ...] = ()


def stability_report(s: Scenario, e: Equilibrium) -> StabilityReport:
    """Both Jacobians with eigenvalues and verdicts at one equilibrium.

    The coupled-system verdict uses full-mode finite differences; the
    analytic matrix carries the closed form for comparison.
    """
    fd_state = _fd_report_state(s, e.point)
    J_full = fd_jacobian(s, fd_state, mode=FD_FULL)
    J_frozen = fd_jacobian(s, fd_state, mode=FD_THETA_FROZEN)
    J_analytic = analytic_jacobian(s, e)
    eig_fd = eigen2(J_full)
    eig_an = eigen2(J_analytic) if J_analytic is not None else None
    notes = list(s.flags())
    if e.label is EquilibriumLabel.DESIRABLE and s.distribution.family is Family.PARETO:
        notes.append(
            "closed-form k-criteria trace back to a symmetrized variant of this "
            "matrix; the coupled-map eigenvalues reported here are 1-alpha and "
            "1-alpha+alpha*k, and the threshold-frozen diagonal is 1-alpha+alpha*k"
        )
    if e.label is EquilibriumLabel.DESIRABLE and s.distribution.family is Family.GAUSSIAN:
        notes.append(
            "the sigma criterion reads the feedback term with a minus sign "
            "(eigenvalue 1-alpha-(beta/sigma)*phi); the map's own derivative "
            "carries a plus sign, so the point is expanding along the gap "
            "direction for every sigma"
        )
    criterion = None
    if e.label is EquilibriumLabel.DESIRABLE:
        criterion = instability_condition(s)
    return StabilityReport(
        equilibrium=e,
        jacobian_fd=J_full,
        jacobian_fd_theta_frozen=J_frozen,
        jacobian_analytic=J_analytic,
        eigenvalues_fd=eig_fd,
        eigenvalues_analytic=eig_an,
        verdict_fd=classify(eig_fd),
        verdict_analytic=classify(eig_an) if eig_an is not None else None,
        criterion=criterion,
        notes=tuple(notes),
    )


def stability_reports(s: Scenario) -> list[StabilityReport]:
    return [stability_report(s, e) for e in analytic_equilibria(s)]


def _fd_report_state(s: Scenario, point: GroupState) -> GroupState:
    # Pareto tails are undefined at mean exactly 0; differentiate at eps.
    if s.distribution.family is Family.PARETO:
        return GroupState(
            mu_c=point.mu_c if point.mu_c > 0.0 else PARETO_EPSILON,
            mu_nc=point.mu_nc if point.mu_nc > 0.0 else PARETO_EPSILON,
        )
    return point


# ---------------------------------------------------------------------------
# Grid exports: basin maps and phase fields.

NONE_LABEL = "none"


@dataclass(frozen=True)
class BasinMap:
    mu_max: float
    resolution: int
    mu_c: np.ndarray
    mu_nc: np.ndarray
    attractor: tuple[str, ...]  # equilibrium label value or "none", per cell
    steps: np.ndarray
    equilibria: tuple[Equilibrium, ...]


@dataclass(frozen=True)
class PhaseField:
    mu_max: float
    resolution: int
    mu_c: np.ndarray
    mu_nc: np.ndarray
    u: np.ndarray
    v: np.ndarray
    ok: np.ndarray


def _grid(mu_max: float, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    if resolution < 2:
        raise DomainError(f"resolution must be >= 2, got {resolution}")
    if not mu_max > 0:
        raise DomainError(f"mu_max must be > 0, got {mu_max}")
    axis = np.linspace(0.0, mu_max, resolution)
    mc, mnc = np.meshgrid(axis, axis, indexing="ij")
    return mc.ravel(), mnc.ravel()


def worker_count() -> int:
    raw = os.environ.get("FAIRDYN_WORKERS", "")
    if raw.strip():
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def basin_map(s: Scenario, mu_max: float, resolution: int,
              max_steps: int = 500, tol: float = 1e-6) -> BasinMap:
    """Label every grid cell over [0, mu_max]^2 by the equilibrium its
    trajectory reaches within tol (max-norm), or "none".

    Cells are advanced together through the vectorized step engine; output
    ordering is the row-major grid order regardless of scheduling.
    """
    if max_steps < 1:
        raise DomainError(f"max_steps must be >= 1, got {max_steps}")
    if not tol > 0:
        raise DomainError(f"tol must be > 0, got {tol}")
    eqs = analytic_equilibria(s)
    mu_c, mu_nc = _grid(mu_max, resolution)

    workers = min(worker_count(), max(1, mu_c.size // 64))
    if workers <= 1:
        labels, steps = _basin_chunk(s, eqs, mu_c, mu_nc, max_steps, tol)
    else:
        # Cells are independent; chunks are gathered by index, so the output
        # ordering never depends on scheduling.
        bounds = np.linspace(0, mu_c.size, workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(
                lambda ab: _basin_chunk(s, eqs, mu_c[ab[0]:ab[1]], mu_nc[ab[0]:ab[1]],
                                        max_steps, tol),
                zip(bounds[:-1], bounds[1:]),
            ))
        labels = [lab for part in parts for lab in part[0]]
        steps = np.concatenate([part[1] for part in parts])
    return BasinMap(
        mu_max=mu_max, resolution=resolution, mu_c=mu_c, mu_nc=mu_nc,
        attractor=tuple(labels), steps=steps, equilibria=tuple(eqs),
    )


def _basin_chunk(s, eqs, mu_c, mu_nc, max_steps, tol):
    n_cells = mu_c.size
    labels = np.full(n_cells, -1, dtype=int)
    steps = np.zeros(n_cells, dtype=int)
    cur_c = mu_c.astype(float).copy()
    cur_nc = mu_nc.astype(float).copy()
    active = np.ones(n_cells, dtype=bool)

    eq_c = np.array([e.point.mu_c for e in eqs])
    eq_nc = np.array([e.point.mu_nc for e in eqs])

    def settle(t: int) -> None:
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            return
        d = np.maximum(
            np.abs(cur_c[idx, None] - eq_c[None, :]),
            np.abs(cur_nc[idx, None] - eq_nc[None, :]),
        )
        best = d.argmin(axis=1)
        hit = d[np.arange(idx.size), best] < tol
        labels[idx[hit]] = best[hit]
        steps[idx[hit]] = t
        active[idx[hit]] = False

    settle(0)
    for t in range(1, max_steps + 1):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        new_c, new_nc, _, _, _, _, ok = batch.step_array(s, cur_c[idx], cur_nc[idx])
        dead = ~ok | ~np.isfinite(new_c) | ~np.isfinite(new_nc) \
            | (new_c > 1e12) | (new_nc > 1e12)
        if dead.any():
            active[idx[dead]] = False
            steps[idx[dead]] = t
        cur_c[idx] = np.where(dead, cur_c[idx], new_c)
        cur_nc[idx] = np.where(dead, cur_nc[idx], new_nc)
        settle(t)
    steps[active] = max_steps

    names = [e.label.value for e in eqs]
    return [names[i] if i >= 0 else NONE_LABEL for i in labels], steps


def phase_field(s: Scenario, mu_max: float, resolution: int) -> PhaseField:
    """One-step displacement vectors (u, v) = step(x) - x on the grid.

    Unsolvable cells report (0, 0) with ok False.
    """
    mu_c, mu_nc = _grid(mu_max, resolution)
    new_c, new_nc, _, _, _, _, ok = batch.step_array(s, mu_c, mu_nc)
    u = np.where(ok, new_c - mu_c, 0.0)
    v = np.where(ok, new_nc - mu_nc, 0.0)
    return PhaseField(mu_max=mu_max, resolution=resolution,
                      mu_c=mu_c, mu_nc=mu_nc, u=u, v=v, ok=ok)


PHASE_CSV_HEADER = "mu_c,mu_nc,u,v,flag"
BASIN_CSV_HEADER = "mu_c,mu_nc,attractor,steps"
EQUILIBRIA_CSV_HEADER = "label,mu_c,mu_nc,residual"


def write_phase_csv(pf: PhaseField, fh: io.TextIOBase) -> None:
    fh.write(PHASE_CSV_HEADER + "\n")
    for i in range(pf.mu_c.size):
        flag = "ok" if pf.ok[i] else "failed"
        fh.write(",".join([
            fmt(pf.mu_c[i]), fmt(pf.mu_nc[i]), fmt(pf.u[i]), fmt(pf.v[i]), flag,
        ]) + "\n")


def write_basin_csv(bm: BasinMap, fh: io.TextIOBase) -> None:
    fh.write(BASIN_CSV_HEADER + "\n")
    for i in range(bm.mu_c.size):
        fh.write(",".join([
            fmt(bm.mu_c[i]), fmt(bm.mu_nc[i]), bm.attractor[i], str(int(bm.steps[i])),
        ]) + "\n")


def write_equilibria_csv(eqs, fh: io.TextIOBase) -> None:
    fh.write(EQUILIBRIA_CSV_HEADER + "\n")
    for e in eqs:
        fh.write(",".join([
            e.label.value, fmt(e.point.mu_c), fmt(e.point.mu_nc), fmt(e.residual),
        ]) + "\n")
