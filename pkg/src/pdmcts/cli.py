"""Command-line front end: ``pdmcts solve|search|experiment|report``.

Exit codes: 0 success, 2 configuration error, 3 resource budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigurationError, ContractViolation, ResourceBudgetError
from .harness import ExperimentSpec, report_from_snapshots, run_experiment
from .oracle import solve_exact
from .problems import resolve_problem
from .tree import _text

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET = 0, 2, 3


def _seeds(text: str) -> list[int]:
    """``"0-9"`` or ``"1,4,7"``."""
    out = []
    for part in text.split(","):
        lo, sep, hi = part.partition("-")
        out.extend(range(int(lo), int(hi) + 1) if sep else [int(lo)])
    return out


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",")]


def _problem_ref(args) -> str:
    if args.config:
        return args.config
    if not args.problem:
        raise ConfigurationError("give --problem or --config")
    return args.problem


def cmd_solve(args) -> int:
    problem = resolve_problem(_problem_ref(args))
    table = solve_exact(problem)
    s0 = problem.initial_state
    rows = [{"action": _text(a), "q": table.q(0, s0, a)} for a in problem.feasible(0, s0)]
    result = {"problem": problem.name, "value": table.v(0, s0),
              "optimal_actions": [_text(a) for a in table.optimal_actions(0, s0)], "q": rows}
    text = json.dumps(result, indent=2) + "\n"
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "solution.json").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def _spec(args, variants, seeds, iterations) -> ExperimentSpec:
    return ExperimentSpec(_problem_ref(args), variants, seeds, iterations, out_dir=args.out,
                          verbosity=args.verbosity, jobs=args.jobs, selection=args.selection,
                          penalty=args.penalty, rollout=args.rollout)


def cmd_search(args) -> int:
    report = run_experiment(_spec(args, [args.variant], [args.seed], [args.iterations]))
    cell = report.cells[0]
    print(f"recommendation {cell.recommendation}")
    print(f"root value {cell.summary['root_value']:.6f}")
    print(f"expansions per node {cell.summary['expansions_per_node']:.4f}")
    violations = sum(cell.invariants.values())
    print(f"invariant violations {violations}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    spec = _spec(args, args.variants.split(","), _seeds(args.seeds), _ints(args.iterations))
    report = run_experiment(spec)
    for c in report.cells:
        print(f"{c.cell}\t{c.recommendation}\t{c.summary['expansions_per_node']:.4f}\t"
              f"{c.summary['median_depth']}")
    return EXIT_OK


def cmd_report(args) -> int:
    summary, _ = report_from_snapshots(args.run_dir, args.out)
    sys.stdout.write(summary)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pdmcts", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def problem_flags(p):
        p.add_argument("--problem", help="example1, example1-two-point, D5, D5-full, "
                       "random:S,A,W,T:seed, or an instance file")
        p.add_argument("--config", help="instance file (overrides --problem)")
        p.add_argument("--out", help="output directory")

    def engine_flags(p):
        p.add_argument("--selection", default="ucb1", choices=("ucb1", "epsilon_greedy"))
        p.add_argument("--penalty", default="zero", choices=("zero", "oracle"))
        p.add_argument("--rollout", default="rolling_horizon",
                       choices=("rolling_horizon", "uniform"))
        p.add_argument("--verbosity", default="root", choices=("none", "root", "full"))
        p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("solve", help="exact backward induction on an enumerable instance")
    problem_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("search", help="one engine run")
    problem_flags(p)
    engine_flags(p)
    p.add_argument("--variant", default="primal_dual", choices=("primal_dual", "vanilla"))
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("experiment", help="variant x seed x budget grid")
    problem_flags(p)
    engine_flags(p)
    p.add_argument("--variants", default="primal_dual,vanilla")
    p.add_argument("--seeds", default="0-9", help="e.g. 0-9 or 1,3,5")
    p.add_argument("--iterations", default="2000", help="comma-separated budgets")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="recompute metrics from tree snapshots")
    p.add_argument("run_dir")
    p.add_argument("--out", help="write summary.csv and depth_histogram.csv here")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ResourceBudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigurationError, ContractViolation, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
