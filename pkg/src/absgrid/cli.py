"""Command-line interface: ``absgrid {solve,abstract,refine,cost,render,bench}``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .abstraction import AbstractionError, abstract_program
from .bench import (PROBLEMS, InstanceSpec, canonical_problem, generate_instance, grid_sorts,
                    instance_facts, load_problem, program_for, read_instance, shipped_instance_text)
from .cegar import LoopOptions, Strategy, run_loop
from .grounding import GroundingError, ground
from .quadtree import GridMapping, initial_mapping, mapping_cost, parse_mapping
from .render import render
from .report import RunReport, aggregate, format_table
from .solver import SolveBudget, enumerate_answer_sets
from .syntax import ParseError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INPUT = 3
EXIT_TIMEOUT = 4

log = logging.getLogger("absgrid")


class CliError(Exception):
    pass


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("ABSGRID_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise CliError(f"ABSGRID_SEED is not an integer: {env!r}") from None


def _load(args):
    """(problem, spec or None, metadata, program) from --instance/--shipped/--problem."""
    if getattr(args, "shipped", None):
        text = shipped_instance_text(args.shipped)
    elif getattr(args, "instance", None):
        text = Path(args.instance).read_text()
    else:
        raise CliError("give --instance FILE or --shipped NAME")
    meta, spec = read_instance(text)
    problem = args.problem or meta.get("problem")
    if problem is None:
        raise CliError("instance has no metadata block; pass --problem")
    problem = canonical_problem(problem)
    return problem, spec, meta, load_problem(problem, text)


def _grid_side(program, problem) -> int:
    sort = grid_sorts(problem)[0]
    return len(program.sort_domain(sort))


def _branching(n: int) -> int:
    for b in (2, 3):
        k = n
        while k > 1 and k % b == 0:
            k //= b
        if k == 1 and n > 1:
            return b
    raise CliError(f"grid side {n} is not a power of 2 or 3")


def _mapping_arg(args, n):
    if getattr(args, "mapping", None):
        g = parse_mapping(Path(args.mapping).read_text())
        if g.n != n:
            raise CliError(f"mapping side {g.n} differs from the grid side {n}")
        return g
    return initial_mapping(n, _branching(n))


def _strategy(args) -> Strategy:
    return Strategy(args.strategy, args.debug_timeout_ms)


def _options(args, problem, seed) -> LoopOptions:
    return LoopOptions(abstract_answer_sets=args.abstract_answer_sets, tighten=args.tighten,
                       cost_denominator=args.cost_denominator, sorts=grid_sorts(problem),
                       global_timeout_s=args.global_timeout_s, seed=seed)


# ---------------------------------------------------------------------------
# subcommands

def cmd_solve(args) -> int:
    problem, _, _, program = _load(args)
    g = ground(program, "relevant")
    res = enumerate_answer_sets(g, SolveBudget(max_models=args.models or None,
                                               timeout_ms=args.timeout_ms))
    for i, m in enumerate(res.models, 1):
        atoms = sorted(str(a) for a in g.decode(m.true_atoms) if a.predicate not in args.hide)
        print(f"Answer {i}: {' '.join(atoms)}")
    status = {True: "SATISFIABLE", False: "UNSATISFIABLE", None: "UNKNOWN"}[res.satisfiable]
    print(status)
    return EXIT_TIMEOUT if res.timed_out and not res.models else EXIT_OK


def cmd_abstract(args) -> int:
    problem, _, _, program = _load(args)
    g = _mapping_arg(args, _grid_side(program, problem))
    dm = g.to_domain_mapping(grid_sorts(problem))
    ap = abstract_program(program, dm, tighten=args.tighten)
    sys.stdout.write(ap.text())
    return EXIT_OK


def cmd_refine(args) -> int:
    seed = _seed(args)
    problem, spec, meta, program = _load(args)
    n = _grid_side(program, problem)
    strategy = _strategy(args)
    opts = _options(args, problem, seed)
    outcome = run_loop(program, _mapping_arg(args, n), strategy, opts)
    instance = dict(meta) or {"problem": problem, "n": n}
    instance.setdefault("source", args.instance or args.shipped)
    report = RunReport.from_outcome(outcome, instance, strategy, opts)
    if args.report:
        Path(args.report).write_text(report.dumps())
    print(f"status: {outcome.status}")
    print(f"steps: {outcome.steps}")
    print(f"cost: {outcome.cost:.4f}")
    print(f"wall_ms: {outcome.wall_ms:.0f}")
    if args.render:
        out = render(outcome.final_mapping, spec if spec and spec.n == n else None, args.render)
        if args.render_out:
            Path(args.render_out).write_text(out)
        else:
            sys.stdout.write(out)
    return EXIT_TIMEOUT if outcome.status == "unknown" else EXIT_OK


def cmd_cost(args) -> int:
    g = parse_mapping(Path(args.mapping).read_text())
    print(f"{mapping_cost(g, args.cost_denominator):.6g}")
    return EXIT_OK


def cmd_render(args) -> int:
    g = parse_mapping(Path(args.mapping).read_text())
    spec = None
    if args.instance or args.shipped:
        text = Path(args.instance).read_text() if args.instance else shipped_instance_text(args.shipped)
        _, spec = read_instance(text)
        if spec is None:
            raise CliError("instance file carries no spec line; cannot draw it")
    out = render(g, spec, args.render)
    if args.out:
        Path(args.out).write_text(out)
    else:
        sys.stdout.write(out)
    return EXIT_OK


def cmd_bench(args) -> int:
    seed0 = _seed(args)
    problems = [canonical_problem(p) for p in args.problem]
    rows = []
    status = EXIT_OK
    for problem in problems:
        for k in range(args.seeds):
            seed = seed0 + k
            spec, text = generate_instance(problem, args.n, seed, certify=args.certify)
            if args.emit:
                d = Path(args.emit)
                d.mkdir(parents=True, exist_ok=True)
                (d / f"{problem}_{args.n}_s{seed}.lp").write_text(text)
            if args.emit_only:
                continue
            program = program_for(spec)
            for strat in args.strategies:
                strategy = Strategy(strat, args.debug_timeout_ms)
                opts = _options(args, problem, seed)
                for rep in range(args.repeats):
                    o = run_loop(program, initial_mapping(args.n, _branching(args.n)), strategy, opts)
                    if o.status == "unknown":
                        status = EXIT_TIMEOUT
                    rows.append({"problem": problem, "n": args.n, "seed": seed,
                                 "strategy": strategy.kind, "repeat": rep, "status": o.status,
                                 "steps": o.steps, "cost": o.cost, "wall_ms": o.wall_ms})
    if args.emit_only:
        return EXIT_OK
    agg = aggregate(rows)
    sys.stdout.write(format_table(agg))
    if args.report:
        Path(args.report).write_text(json.dumps({"runs": rows, "aggregate": agg}, indent=2) + "\n")
    return status


# ---------------------------------------------------------------------------
# parser

def _add_instance(p):
    p.add_argument("--instance", help="instance .lp file (facts, optional metadata header)")
    p.add_argument("--shipped", help="name of a shipped instance, e.g. reachability_fig_8")
    p.add_argument("--problem", help=f"problem tag ({', '.join(PROBLEMS)} or R/S/KT/V/V_KT)")


def _add_loop(p):
    p.add_argument("--strategy", default="default",
                   choices=["default", "two-phase", "time-inc", "grid-inc"])
    p.add_argument("--abstract-answer-sets", type=int, default=3, metavar="K")
    p.add_argument("--debug-timeout-ms", type=int, default=50000, metavar="T")
    p.add_argument("--global-timeout-s", type=float, default=None, metavar="S")
    p.add_argument("--tighten", action="store_true",
                   help="drop the guessing rules for uncertain relations (may lose over-approximation)")
    p.add_argument("--cost-denominator", default="literal", choices=["literal", "per-level-count"])
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--report", metavar="PATH")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="absgrid", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="enumerate answer sets of encoding + instance")
    _add_instance(p)
    p.add_argument("--models", type=int, default=1, help="0 for all")
    p.add_argument("--timeout-ms", type=int, default=None)
    p.add_argument("--hide", nargs="*", default=["adj", "kmove", "next", "inblock"])
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("abstract", help="print the abstract program for a mapping")
    _add_instance(p)
    p.add_argument("--mapping", help="mapping file (default: initial mapping)")
    p.add_argument("--tighten", action="store_true")
    p.set_defaults(func=cmd_abstract)

    p = sub.add_parser("refine", help="run the abstraction and refinement loop")
    _add_instance(p)
    _add_loop(p)
    p.add_argument("--mapping", help="initial mapping file (default: one split of the grid)")
    p.add_argument("--render", choices=["ascii", "svg"])
    p.add_argument("--render-out", metavar="PATH")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("cost", help="cost of a serialized mapping")
    p.add_argument("--mapping", required=True)
    p.add_argument("--cost-denominator", default="literal", choices=["literal", "per-level-count"])
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("render", help="draw a mapping, optionally over an instance")
    p.add_argument("--mapping", required=True)
    p.add_argument("--instance")
    p.add_argument("--shipped")
    p.add_argument("--render", default="ascii", choices=["ascii", "svg"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("bench", help="generate instances and run strategies over them")
    p.add_argument("--problem", nargs="+", default=["reachability"])
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--seeds", type=int, default=10, help="number of consecutive seeds")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--strategies", nargs="+", default=["default"],
                   choices=["default", "two-phase", "time-inc", "grid-inc"])
    p.add_argument("--certify", action="store_true",
                   help="keep only instances a brute-force oracle proves unsatisfiable")
    p.add_argument("--emit", metavar="DIR", help="write generated instances as .lp files")
    p.add_argument("--emit-only", action="store_true")
    _add_loop(p)
    p.set_defaults(func=cmd_bench, strategy="default")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ParseError, GroundingError, AbstractionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (CliError, ValueError, KeyError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
