"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 invalid input, 3 no convergence,
4 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .ccg import BoundsCrossed, CCGConfig, ccg_solve
from .io import load_case, load_plan, plan_to_dict, report_from_trace, write_report
from .model import CaseError
from .mp.backends import BACKENDS
from .opf import evaluate_plan
from .oracle import EnumerationLimit, oracle_global_solve

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_SOLVER = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="robust-expansion", description="Robust dynamic transmission and generation expansion.")
    parser.add_argument("--backend", choices=BACKENDS, help="LP/MIP engine (default: built-in, or $ROBUST_EXPANSION_BACKEND)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="run column-and-constraint generation")
    s.add_argument("case", help="case file, or the name of a bundled case")
    s.add_argument("--out", type=Path, help="report path")
    s.add_argument("--format", choices=("json", "csv"), default="json")
    s.add_argument("--epsilon", type=float, help="relative gap tolerance")
    s.add_argument("--max-iter", type=int, help="iteration cap")
    s.add_argument("--verbose", action="store_true", help="print one line per iteration")
    s.add_argument("--dump-models", nargs="?", const="models", metavar="DIR",
                   help="write every master and subproblem program in LP text form")

    e = sub.add_parser("evaluate", help="cost of a given plan at nominal uncertainty")
    e.add_argument("case")
    e.add_argument("plan", type=Path, help='JSON {"lines": {id: period}, "generators": {id: period}}')

    o = sub.add_parser("oracle", help="exhaustive global optimum (small cases only)")
    o.add_argument("case")
    o.add_argument("--compare", action="store_true", help="also run solve and report the difference")

    v = sub.add_parser("validate", help="check a case file")
    v.add_argument("case")
    return parser


def _ccg_config(case, args) -> CCGConfig:
    base = case.ccg
    eps = args.epsilon if args.epsilon is not None else (base.epsilon if base else CCGConfig().epsilon)
    cap = args.max_iter if args.max_iter is not None else (base.max_iterations if base else CCGConfig().max_iterations)
    try:
        return CCGConfig(eps, cap)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _print_schedule(report) -> None:
    if not report.schedule:
        print("schedule: nothing built")
        return
    print("schedule:")
    for r in report.schedule:
        print(f"  t={r.period:<3d} {r.kind:<9s} {r.asset:<12s} at {r.location:<10s} {r.invest_cost:12.3f} M€")


def cmd_solve(args) -> int:
    case = load_case(args.case)
    trace = ccg_solve(case, _ccg_config(case, args), backend=args.backend, verbose=args.verbose,
                      dump_dir=args.dump_models)
    report = report_from_trace(case, trace)
    print(f"case {case.name}: {'converged' if report.converged else 'NOT converged'} after "
          f"{report.iterations} iteration(s)")
    print(f"objective {report.objective:.6f} M€  (lower {report.lower_bound:.6f}, gap {report.gap:.3e})")
    print(f"investment {report.investment_npc:.6f} M€  (lines {report.line_npc:.6f}, "
          f"generators {report.gen_npc:.6f})")
    print(f"operation {report.operational_npc:.6f} M€  (of which shedding {report.shedding_npc:.6f})")
    _print_schedule(report)
    if args.out:
        for p in write_report(report, args.out, args.format):
            print(f"wrote {p}")
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_evaluate(args) -> int:
    case = load_case(args.case)
    plan = load_plan(case, args.plan)
    ev = evaluate_plan(case, plan, backend=args.backend)
    out = {
        "plan": plan_to_dict(plan),
        "total": ev.total,
        "investment": {"lines": ev.line_npc, "generators": ev.gen_npc},
        "operational_npc": ev.operational_npc,
        "shedding_npc": ev.shedding_npc,
        "periods": [{"period": p.period, "c_op": p.c_op, "shed_cost": p.shed_cost} for p in ev.periods],
    }
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_oracle(args) -> int:
    case = load_case(args.case)
    res = oracle_global_solve(case, backend=args.backend)
    print(f"oracle: {res.objective:.9f} M€ over {res.plans_evaluated} plan(s)")
    print(f"plan: {json.dumps(plan_to_dict(res.plan))}")
    if not args.compare:
        return EXIT_OK
    trace = ccg_solve(case, backend=args.backend)
    diff = abs(trace.objective - res.objective) / max(1.0, abs(res.objective))
    print(f"solve:  {trace.objective:.9f} M€ ({trace.n_iterations} iteration(s)); relative difference {diff:.3e}")
    if not trace.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK if diff <= 1e-6 else EXIT_SOLVER


def cmd_validate(args) -> int:
    case = load_case(args.case)
    print(f"{case.name}: ok ({len(case.buses)} buses, {len(case.lines)} lines, {len(case.generators)} generators, "
          f"{len(case.demands)} demands, {case.planning.horizon_years} periods)")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "evaluate": cmd_evaluate, "oracle": cmd_oracle, "validate": cmd_validate}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CaseError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (RuntimeError, EnumerationLimit, BoundsCrossed, np.linalg.LinAlgError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
