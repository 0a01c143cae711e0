"""Command-line front end."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import export
from .control import solve_control
from .dynamic import FREE, PRORATA, clear_multistage
from .network import ScenarioFileError, load_scenario, validate_scenario
from .robust import EXACT, PAPER, RobustInfeasibleError, monte_carlo, solve_robust, evaluate_policy
from .static import SolverFailure, clear_free, clear_prorata
from .suite import MC_SAMPLES, run_paper_suite

COMMANDS = ("validate", "clear", "clear-multi", "control", "robust", "paper-suite")
EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE = 0, 1, 2
RESIDUAL_TOL = 1e-6


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="claritas", description="Clearing, bailout control and robust "
                                 "policies for interbank liability networks.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--input", "-i", type=Path, help="scenario JSON file")
    ap.add_argument("--output", "-o", type=Path, help="where to write the result document")
    ap.add_argument("--mode", choices=(PRORATA, FREE), default=PRORATA)
    ap.add_argument("--objective", choices=(PAPER, EXACT), default=PAPER,
                    help="worst-case objective bound (robust only)")
    ap.add_argument("--format", choices=("json", "csv"), default="json")
    ap.add_argument("--seed", type=int, default=0, help="seed for Monte Carlo validation")
    return ap


def _fmt(x) -> str:
    return f"{float(x):.6g}"


def _summary(title: str, rows: list[tuple[str, object]]) -> str:
    width = max(len(k) for k, _ in rows)
    lines = [title]
    for k, v in rows:
        text = v if isinstance(v, str) else ("yes" if v is True else "no" if v is False else _fmt(v))
        lines.append(f"  {k:<{width}}  {text}")
    return "\n".join(lines)


def _clear(args, s):
    if s.horizon != 1:
        raise UsageError(f"clear needs a single-period scenario (got T={s.horizon}); use clear-multi")
    solver = clear_prorata if args.mode == PRORATA else clear_free
    res = solver(s.network, s.inflows[0])
    names = list(s.network.names) + ["external"]
    doc = {
        "kind": "clearing",
        "mode": args.mode,
        "total_loss": res.shortfall,
        "payments": res.payments.tolist(),
        "outflows": res.vector.tolist(),
        "shortfall_by_node": res.shortfall_by_node.tolist(),
        "defaulted": [names[i] for i in res.defaulted],
    }
    if args.format == "csv":
        lines = ["node,nominal,paid,shortfall,net_worth"]
        for i, name in enumerate(names):
            lines.append(f"{name},{res.nominal[i]!r},{res.vector[i]!r},{res.shortfall_by_node[i]!r},"
                         f"{res.net_worth[i]!r}")
        text = "\n".join(lines) + "\n"
    else:
        text = export.dumps(doc)
    summary = _summary(f"single-period clearing ({args.mode})", [
        ("total loss", res.shortfall),
        ("total injections", 0.0),
        ("defaulted banks", ", ".join(doc["defaulted"]) or "none"),
        ("default-free", len(res.defaulted) == 0),
    ])
    return text, summary, EXIT_OK


def _clear_multi(args, s):
    _, traj = clear_multistage(s.network, s.inflows, s.alpha, mode=args.mode)
    text = export.trajectory_to_csv(traj) if args.format == "csv" else \
        export.dumps({"kind": "multistage_clearing", "mode": args.mode, **export.trajectory_to_dict(traj)})
    summary = _summary(f"multi-period clearing ({args.mode}, T={s.horizon})", [
        ("total loss", traj.total_loss),
        ("total injections", 0.0),
        ("terminal residual", traj.terminal_residual),
        ("default-free", traj.terminal_residual <= RESIDUAL_TOL),
    ])
    return text, summary, EXIT_OK


def _control(args, s):
    sol = solve_control(s, mode=args.mode)
    text = export.control_to_csv(sol) if args.format == "csv" else export.dumps(export.control_to_dict(sol, s))
    summary = _summary(f"optimal control ({args.mode}, T={s.horizon})", [
        ("total loss", sol.total_loss),
        ("total injections", sol.total_injection),
        ("objective J", sol.objective),
        ("terminal residual", sol.trajectory.terminal_residual),
        ("default-free", sol.trajectory.terminal_residual <= RESIDUAL_TOL),
    ])
    return text, summary, EXIT_OK


def _robust(args, s):
    if args.mode != PRORATA:
        raise UsageError("robust requires --mode prorata")
    if s.uncertainty is None:
        raise UsageError("robust requires an 'uncertainty' block in the scenario file")
    try:
        sol = solve_robust(s, objective_mode=args.objective)
    except RobustInfeasibleError as exc:
        return None, f"robust program {exc.status.value}\n" + "\n".join(f"  {d}" for d in exc.diagnosis), \
            EXIT_INFEASIBLE
    evals = monte_carlo(sol, s, samples=MC_SAMPLES, seed=args.seed)
    ok = sum(e.default_free for e in evals)
    nominal = evaluate_policy(sol.policy, np.zeros_like(sol.box.radii), s, sol.box)
    worst_bounds_ok = not sol.bounds.violations(s.budget)
    default_free = ok == len(evals) and worst_bounds_ok
    if args.format == "csv":
        text = export.robust_to_csv(sol)
    else:
        doc = export.robust_to_dict(sol)
        doc["monte_carlo"] = {
            "samples": len(evals), "seed": args.seed, "default_free": ok,
            "max_objective": max(e.objective for e in evals),
            "max_loss": max(e.trajectory.total_loss for e in evals),
        }
        text = export.dumps(doc)
    summary = _summary(f"robust affine control ({args.objective} objective, T={s.horizon})", [
        ("total loss (nominal)", nominal.trajectory.total_loss),
        ("total injections (nominal)", sol.nominal_effort),
        ("total injections (worst case)", sol.worst_case_effort),
        ("worst-case objective", sol.worst_case_objective),
        ("Monte Carlo default-free", f"{ok}/{len(evals)} (seed {args.seed})"),
        ("default-free", default_free),
    ])
    return text, summary, EXIT_OK


def _paper_suite(args):
    report = run_paper_suite()
    doc = {
        "kind": "suite",
        "passed": report.passed,
        "experiments": [
            {"name": r.name, "passed": r.passed, "note": r.note,
             "checks": [{"name": c.name, "expected": c.expected, "actual": c.actual, "passed": c.passed}
                        for c in r.checks]}
            for r in report.results
        ],
    }
    return export.dumps(doc), report.table(), EXIT_OK if report.passed else EXIT_INVALID


HANDLERS = {"clear": _clear, "clear-multi": _clear_multi, "control": _control, "robust": _robust}


def run(args: argparse.Namespace, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    if args.command == "paper-suite":
        text, summary, code = _paper_suite(args)
    else:
        if args.input is None:
            print(f"claritas {args.command}: --input is required", file=err)
            return EXIT_INVALID
        try:
            s = load_scenario(args.input)
        except FileNotFoundError:
            print(f"{args.input}: no such file", file=err)
            return EXIT_INVALID
        except ScenarioFileError as exc:
            print(f"invalid scenario: {exc}", file=err)
            return EXIT_INVALID
        problems = validate_scenario(s)
        if problems:
            print(f"{args.input}: {len(problems)} problem(s)", file=err)
            for v in problems:
                print(f"  [{v.code}] {v.message}", file=err)
            return EXIT_INVALID
        if args.command == "validate":
            print(f"{args.input}: valid ({s.network.n} banks, {s.horizon} period(s))", file=out)
            return EXIT_OK
        try:
            text, summary, code = HANDLERS[args.command](args, s)
        except UsageError as exc:
            print(f"claritas {args.command}: {exc}", file=err)
            return EXIT_INVALID
        except SolverFailure as exc:
            print(f"claritas {args.command}: {exc}", file=err)
            return EXIT_INVALID
    print(summary, file=out)
    if text is not None and args.output is not None:
        args.output.write_text(text)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
