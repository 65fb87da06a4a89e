"""Command line front end.

Exit status: 0 on success, 1 when goals fail or no plan exists (or the
search budget runs out), 2 on usage or parse errors.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .formats import ParseError, parse_plan, parse_problem, serialize_plan, serialize_problem
from .knowledge import DepthOverflowError
from .planner import (
    PlanError,
    SearchBudgetExceeded,
    min_parallel_steps,
    neg_length_bound,
    quick_infeasible,
    search_optimal,
    solve_neg,
    verify,
)
from .protocols import NoProtocolError, auto_select
from .reduction import parse_dimacs, sat_to_gossip
from .report import emit_stats_csv, plot_stats, sweep

log = logging.getLogger("epigossip")

OK, FAIL, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def parse_range(text: str) -> range:
    """``"4..10"`` (inclusive) or a single number."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            r = range(int(lo), int(hi) + 1)
        else:
            r = range(int(text), int(text) + 1)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or A..B, got {text!r}") from None
    if not r:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return r


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _write(path: str | None, text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _load_problem(path: str):
    text = _read(path)
    try:
        return parse_problem(text)
    except ParseError as exc:
        raise UsageError(f"{path}: {exc}") from None
    except (ValueError, DepthOverflowError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def cmd_plan(args) -> int:
    inst = _load_problem(args.problem)
    try:
        plan = auto_select(inst)
    except NoProtocolError as exc:
        print(f"no protocol applies: {exc}", file=sys.stderr)
        return FAIL
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    log.info("%s protocol, %d items", plan.metadata.get("protocol", "none"), len(plan))
    _write(args.output, serialize_plan(plan))
    return OK


def cmd_verify(args) -> int:
    inst = _load_problem(args.problem)
    try:
        plan = parse_plan(_read(args.plan), inst.mode)
    except ParseError as exc:
        raise UsageError(f"{args.plan}: {exc}") from None
    try:
        report = verify(inst, plan, trace=args.trace)
    except PlanError as exc:
        print(f"invalid plan: {exc}", file=sys.stderr)
        return FAIL
    print(report)
    if args.trace:
        print("truths per item: " + " ".join(str(c) for c in report.state_trace))
    return OK if report.success else FAIL


def cmd_search(args) -> int:
    inst = _load_problem(args.problem)
    if any(not g.positive for g in inst.goals) or inst.allow_change:
        raise UsageError("search handles positive goals without change; use solve-neg")
    reason = quick_infeasible(inst)
    if reason:
        print(f"infeasible: {reason}", file=sys.stderr)
        return FAIL
    run = min_parallel_steps if inst.mode == "parallel" else search_optimal
    try:
        res = run(inst, args.max, node_budget=args.budget, workers=args.threads)
    except SearchBudgetExceeded as exc:
        print(f"search budget exhausted after {exc.nodes} nodes; "
              f"proven absent at <={exc.proven_upto}", file=sys.stderr)
        return FAIL
    if not res.found:
        print(f"no plan within budget: proven absent at <={res.certificate}")
        return FAIL
    print(f"optimum {res.optimum}; proven absent at <={res.certificate}; {res.nodes} nodes", file=sys.stderr)
    _write(args.output, serialize_plan(res.plan))
    return OK


def cmd_solve_neg(args) -> int:
    inst = _load_problem(args.problem)
    bound = neg_length_bound(inst)
    if inst.mode == "parallel":
        print(f"note: parallel mode uses the sequential bound of {bound} steps, "
              "which is not proven for parallel plans", file=sys.stderr)
    try:
        plan = solve_neg(inst, node_budget=args.budget, seed=args.seed)
    except SearchBudgetExceeded as exc:
        print(str(exc), file=sys.stderr)
        return FAIL
    if plan is None:
        print(f"no plan: unsolvable (exhaustive search, length bound {bound})")
        return FAIL
    _write(args.output, serialize_plan(plan))
    return OK


def cmd_reduce(args) -> int:
    try:
        formula = parse_dimacs(_read(args.dimacs))
    except ValueError as exc:
        raise UsageError(f"{args.dimacs}: {exc}") from None
    inst, _ = sat_to_gossip(formula)
    _write(args.output, serialize_problem(inst))
    return OK


def cmd_stats(args) -> int:
    rows = sweep(args.mode, args.n, args.d, check=args.verify)
    _write(args.output, emit_stats_csv(rows))
    if args.plot:
        plot_stats(rows, args.plot)
        log.info("wrote %s", args.plot)
    bad = [r for r in rows if not r.match or r.verified is False]
    for r in bad:
        print(f"mismatch: {r.protocol} n={r.n} d={r.d}: {r.measured} vs {r.formula}"
              + (" (verify failed)" if r.verified is False else ""), file=sys.stderr)
    return FAIL if bad else OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="epigossip", description="Epistemic gossip planning toolkit.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("plan", help="write a protocol plan for a full-depth problem")
    s.add_argument("problem")
    s.add_argument("-o", "--output", help="plan file (default stdout)")
    s.set_defaults(func=cmd_plan)

    s = sub.add_parser("verify", help="check a plan against a problem")
    s.add_argument("problem")
    s.add_argument("plan")
    s.add_argument("--trace", action="store_true", help="also print truth counts after each item")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("search", help="shortest plan by exhaustive search")
    s.add_argument("problem")
    s.add_argument("--max", type=int, required=True, help="longest plan (or most steps) to try")
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--budget", type=int, default=20_000_000, help="node budget")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_search)

    s = sub.add_parser("solve-neg", help="plan for goals with negations")
    s.add_argument("problem")
    s.add_argument("--seed", type=int, help="shuffle the action order")
    s.add_argument("--budget", type=int, default=5_000_000, help="state budget")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_solve_neg)

    s = sub.add_parser("reduce", help="turn a DIMACS CNF file into a problem file")
    s.add_argument("dimacs")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_reduce)

    s = sub.add_parser("stats", help="CSV of protocol lengths against their formulas")
    s.add_argument("--mode", choices=["two-way", "one-way", "parallel"], default="two-way")
    s.add_argument("--n", type=parse_range, default=parse_range("4..10"), help="agent range, e.g. 4..10")
    s.add_argument("--d", type=parse_range, default=parse_range("1..3"), help="depth range, e.g. 1..3")
    s.add_argument("--verify", action="store_true", help="also verify every plan")
    s.add_argument("-o", "--output", help="CSV file (default stdout)")
    s.add_argument("--plot", metavar="PATH", help="also save a figure (format from the extension)")
    s.set_defaults(func=cmd_stats)
    return p


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    if args.command == "stats" and (min(args.n) < 2 or min(args.d) < 1):
        print("error: stats needs n >= 2 and d >= 1", file=sys.stderr)
        return USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
