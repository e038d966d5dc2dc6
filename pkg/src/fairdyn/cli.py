"""Command-line front end.

Every subcommand reads a JSON scenario file and writes its artifact to
stdout or --out. Numeric output uses shortest round-trip decimals (at
least 12 significant digits wherever they matter), so reruns produce
byte-identical artifacts.

Exit codes: 0 ok, 2 usage, 3 scenario parse/validation, 4 solver failure,
5 file I/O. FAIRDYN_WORKERS caps internal parallelism (default: available
parallelism).
"""

from __future__ import annotations

import argparse
import contextlib
import io
import json
import sys

from . import analysis, dynamics, montecarlo
from .errors import DomainError, ScenarioError, SolverError
from .scenario import Scenario, load_scenario
from .threshold import GroupState, solve_for_policy

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_SOLVER = 4
EXIT_IO = 5

fmt = dynamics.fmt


def _parse_state(text: str) -> GroupState:
    parts = text.split(",")
    if len(parts) != 2:
        raise ScenarioError("state", f"expected 'mu_c,mu_nc', got {text!r}")
    try:
        return GroupState(mu_c=float(parts[0]), mu_nc=float(parts[1]))
    except ValueError as exc:
        raise ScenarioError("state", str(exc)) from exc


@contextlib.contextmanager
def _output(path: str | None):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as fh:
            yield fh


def _default_mu_max(s: Scenario) -> float:
    eqs = analysis.analytic_equilibria(s)
    top = max(max(e.point.mu_c, e.point.mu_nc) for e in eqs)
    return 1.05 * top


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairdyn",
        description="Simulate and analyze top-n threshold-classifier feedback dynamics.",
        epilog="Exit codes: 0 ok, 2 usage, 3 scenario parse, 4 solver, 5 I/O. "
               "Set FAIRDYN_WORKERS to cap internal parallelism.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_)
        p.add_argument("scenario", help="path to the JSON scenario file")
        p.add_argument("--out", help="output path (default: stdout)")
        return p

    p = add("threshold", "solve the acceptance threshold(s) at a state")
    p.add_argument("--state", required=True, help="group means as 'mu_c,mu_nc'")

    p = add("step", "advance the group means by one time step")
    p.add_argument("--state", required=True, help="group means as 'mu_c,mu_nc'")

    p = add("simulate", "iterate the map and write the trajectory CSV")
    p.add_argument("--start", required=True, help="initial means as 'mu_c,mu_nc'")
    p.add_argument("--steps", type=int, default=1000, help="maximum steps (default 1000)")
    p.add_argument("--tol", type=float, default=1e-9,
                   help="max-norm convergence tolerance (default 1e-9)")

    p = add("phase", "one-step displacement field CSV on a grid")
    p.add_argument("--mu-max", type=float, default=None,
                   help="grid upper bound (default 1.05 * max equilibrium coordinate)")
    p.add_argument("--resolution", type=int, default=21, help="grid points per axis (default 21)")

    p = add("basin", "attractor label CSV on a grid")
    p.add_argument("--mu-max", type=float, default=None,
                   help="grid upper bound (default 1.05 * max equilibrium coordinate)")
    p.add_argument("--resolution", type=int, default=21, help="grid points per axis (default 21)")
    p.add_argument("--max-steps", type=int, default=500, help="step budget per cell (default 500)")
    p.add_argument("--tol", type=float, default=1e-6,
                   help="distance to count as reaching an attractor (default 1e-6)")

    add("equilibria", "closed-form fixed points as CSV")

    add("stability", "Jacobians, eigenvalues, verdicts, and criteria as JSON")

    p = add("montecarlo", "finite-population trial summary as JSON")
    p.add_argument("--state", required=True, help="group means as 'mu_c,mu_nc'")
    p.add_argument("--trials", type=int, default=1000, help="number of trials (default 1000)")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--trial-csv", help="also write per-trial rows to this CSV path")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _dispatch(args)
    except ScenarioError as exc:
        print(f"fairdyn: scenario error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (SolverError, DomainError) as exc:
        print(f"fairdyn: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"fairdyn: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def _dispatch(args: argparse.Namespace) -> int:
    s = load_scenario(args.scenario)
    out_path = getattr(args, "out", None)

    if args.command == "threshold":
        sol = solve_for_policy(s, _parse_state(args.state))
        with _output(out_path) as fh:
            for key, value in (("theta_c", sol.theta_c), ("theta_nc", sol.theta_nc),
                               ("P_c", sol.P_c), ("P_nc", sol.P_nc),
                               ("residual", sol.residual)):
                fh.write(f"{key}={fmt(value)}\n")
            if sol.flags:
                fh.write(f"flags={','.join(sol.flags)}\n")
        return EXIT_OK

    if args.command == "step":
        x = _parse_state(args.state)
        nxt, sol = dynamics.step_with_solution(s, x)
        with _output(out_path) as fh:
            fh.write(f"mu_c={fmt(nxt.mu_c)}\n")
            fh.write(f"mu_nc={fmt(nxt.mu_nc)}\n")
            fh.write(f"theta_c={fmt(sol.theta_c)}\n")
            fh.write(f"theta_nc={fmt(sol.theta_nc)}\n")
            fh.write(f"P_c={fmt(sol.P_c)}\n")
            fh.write(f"P_nc={fmt(sol.P_nc)}\n")
        return EXIT_OK

    if args.command == "simulate":
        traj = dynamics.simulate(s, _parse_state(args.start),
                                 max_steps=args.steps, tol=args.tol)
        with _output(out_path) as fh:
            dynamics.write_trajectory_csv(traj, fh)
        return EXIT_OK

    if args.command == "phase":
        mu_max = args.mu_max if args.mu_max is not None else _default_mu_max(s)
        pf = analysis.phase_field(s, mu_max, args.resolution)
        with _output(out_path) as fh:
            analysis.write_phase_csv(pf, fh)
        return EXIT_OK

    if args.command == "basin":
        mu_max = args.mu_max if args.mu_max is not None else _default_mu_max(s)
        bm = analysis.basin_map(s, mu_max, args.resolution,
                                max_steps=args.max_steps, tol=args.tol)
        with _output(out_path) as fh:
            analysis.write_basin_csv(bm, fh)
        return EXIT_OK

    if args.command == "equilibria":
        eqs = analysis.analytic_equilibria(s)
        with _output(out_path) as fh:
            analysis.write_equilibria_csv(eqs, fh)
        return EXIT_OK

    if args.command == "stability":
        reports = analysis.stability_reports(s)
        with _output(out_path) as fh:
            json.dump([_report_doc(r) for r in reports], fh, indent=2)
            fh.write("\n")
        return EXIT_OK

    if args.command == "montecarlo":
        x = _parse_state(args.state)
        outcomes = montecarlo.run_trials(s, x, args.trials, args.seed)
        summary = montecarlo.summarize_trials(s, x, outcomes, args.seed)
        if args.trial_csv:
            with open(args.trial_csv, "w", encoding="utf-8") as fh:
                montecarlo.write_trials_csv(outcomes, fh)
        with _output(out_path) as fh:
            json.dump(_summary_doc(summary), fh, indent=2)
            fh.write("\n")
        return EXIT_OK

    raise ScenarioError("command", f"unknown subcommand {args.command!r}")


def _matrix_doc(M) -> list[list[float]] | None:
    if M is None:
        return None
    return [[float(M[0, 0]), float(M[0, 1])], [float(M[1, 0]), float(M[1, 1])]]


def _eigen_doc(pair) -> list[dict] | None:
    if pair is None:
        return None
    return [{"re": z.real, "im": z.imag} for z in pair]


def _report_doc(r: analysis.StabilityReport) -> dict:
    crit = None
    if r.criterion is not None:
        crit = {
            "family": r.criterion.family.value,
            "holds": r.criterion.holds,
            "margin": r.criterion.margin,
            "description": r.criterion.description,
            "details": r.criterion.details,
        }
    return {
        "equilibrium": {
            "label": r.equilibrium.label.value,
            "mu_c": r.equilibrium.point.mu_c,
            "mu_nc": r.equilibrium.point.mu_nc,
            "residual": r.equilibrium.residual,
        },
        "jacobian_fd": _matrix_doc(r.jacobian_fd),
        "jacobian_fd_theta_frozen": _matrix_doc(r.jacobian_fd_theta_frozen),
        "jacobian_analytic": _matrix_doc(r.jacobian_analytic),
        "eigenvalues_fd": _eigen_doc(r.eigenvalues_fd),
        "eigenvalues_analytic": _eigen_doc(r.eigenvalues_analytic),
        "verdict_fd": r.verdict_fd,
        "verdict_analytic": r.verdict_analytic,
        "criterion": crit,
        "notes": list(r.notes),
    }


def _summary_doc(t: montecarlo.TrialSummary) -> dict:
    return {
        "trials": t.trials,
        "seed": t.seed,
        "accepted_c_mean": t.accepted_c_mean,
        "accepted_c_var": t.accepted_c_var,
        "accepted_nc_mean": t.accepted_nc_mean,
        "accepted_nc_var": t.accepted_nc_var,
        "accuracy_mean": t.accuracy_mean,
        "dp_gap_mean": t.dp_gap_mean,
        "model_P_c": t.model_P_c,
        "model_P_nc": t.model_P_nc,
        "expected_c": t.expected_c,
        "expected_nc": t.expected_nc,
        "z_c": t.z_c,
        "z_nc": t.z_nc,
        "flags": list(t.flags),
    }


if __name__ == "__main__":
    sys.exit(main())
