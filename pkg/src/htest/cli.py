"""Command-line front end: ``htest {gen,test,sweep,pipeline,treedepth,selfcheck}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiments import GENERATORS, estimate_rejection, instance_for_size, query_sweep, sweep_csv
from .graph import BUILTIN_PATTERNS, Graph, GraphFormatError, read_graph
from .oracle import Oracle, seed_from_env
from .pipeline import PipelineError, run_pipeline
from .sparsity import DEFAULT_CAP, TreedepthCapError, treedepth_exact
from .tester import test_h_freeness

EXIT_OK, EXIT_REJECT, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def load_pattern(name: str) -> Graph:
    if name in BUILTIN_PATTERNS:
        return BUILTIN_PATTERNS[name]()
    if Path(name).is_file():
        return read_graph(name)
    raise UsageError(f"pattern {name!r} is neither a builtin ({', '.join(BUILTIN_PATTERNS)}) nor a file")


def parse_sizes(text: str) -> list[int]:
    try:
        sizes = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad --sizes value {text!r}") from None
    if not sizes or any(s < 1 for s in sizes):
        raise UsageError("--sizes needs positive integers")
    return sizes


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    seed = seed_from_env()
    print(f"seed={seed}", file=sys.stderr)
    return seed


def cmd_gen(args) -> int:
    seed = _resolve_seed(args)
    sizes = parse_sizes(args.sizes)
    if len(sizes) != 1:
        raise UsageError("gen takes a single size")
    pattern = load_pattern(args.pattern) if args.pattern else None
    inst = instance_for_size(args.gen, sizes[0], seed, pattern)
    _emit(inst.to_text(), args.out)
    return EXIT_OK


def cmd_test(args) -> int:
    seed = _resolve_seed(args)
    g = read_graph(args.graph)
    H = load_pattern(args.pattern)
    oracle = Oracle(g, seed, record=args.transcript)
    verdict = test_h_freeness(oracle, H, args.eps, args.reps)
    if verdict.witness is not None:
        verdict.witness.validate(g)
    out = {"schema": 1, "seed": seed, "pattern": H.edges(), "n_reps": args.reps, "eps": args.eps}
    out.update(verdict.as_dict())
    _emit(_json(out), args.out)
    return EXIT_REJECT if verdict.rejected else EXIT_OK


def cmd_sweep(args) -> int:
    seed = _resolve_seed(args)
    pattern = load_pattern(args.pattern) if args.pattern else None
    rows = query_sweep(args.gen, parse_sizes(args.sizes), args.reps, args.trials, seed, args.jobs, pattern)
    _emit(sweep_csv(rows), args.out)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    seed = _resolve_seed(args)
    g = read_graph(args.graph)
    H = load_pattern(args.pattern)
    try:
        report = run_pipeline(g, H, args.eps, args.variant, trials=args.trials, seed=seed)
    except PipelineError as e:
        _emit(_json({"schema": 1, "seed": seed, "error": str(e), "stage": e.stage}), args.out)
        return EXIT_REJECT
    out = {"schema": 1, "seed": seed}
    out.update(report.as_dict())
    _emit(_json(out), args.out)
    return EXIT_OK


def cmd_treedepth(args) -> int:
    g = read_graph(args.graph)
    depth, order = treedepth_exact(g, args.cap)
    lines = [f"td={depth}", "# vertex parent level"]
    for v in range(g.n):
        p = order.parent[v]
        lines.append(f"{v} {'-' if p is None else p} {order.level[v]}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    from .selfcheck import run_selfcheck

    seed = args.seed if args.seed is not None else 0
    results = run_selfcheck(seed)
    text = "".join(f"{'PASS' if ok else 'FAIL'} {name}\n" for name, ok in results)
    _emit(text, args.out)
    return EXIT_OK if all(ok for _, ok in results) else EXIT_REJECT


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="htest", description="Constant-query H-freeness tester and tools.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed=True, out=True):
        if seed:
            sp.add_argument("--seed", type=int, help="root seed (default: $HTEST_SEED, else random)")
        if out:
            sp.add_argument("--out", help="write output here instead of standard output")

    sp = sub.add_parser("gen", help="write an instance with its certificate")
    sp.add_argument("--gen", required=True, choices=GENERATORS)
    sp.add_argument("--sizes", required=True, help="target vertex count")
    sp.add_argument("--pattern", help="pattern for the planted generators")
    common(sp)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("test", help="run the tester on a graph file")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--pattern", required=True)
    sp.add_argument("--eps", type=float, default=0.1)
    sp.add_argument("--reps", type=int, default=10)
    sp.add_argument("--transcript", action="store_true", help="include every oracle answer")
    common(sp)
    sp.set_defaults(func=cmd_test)

    sp = sub.add_parser("sweep", help="query count and rejection rate across host sizes (CSV)")
    sp.add_argument("--gen", required=True, choices=GENERATORS)
    sp.add_argument("--sizes", required=True, help="comma-separated host sizes")
    sp.add_argument("--pattern", help="pattern for the planted generators")
    sp.add_argument("--reps", type=int, default=10)
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--jobs", type=int, default=1)
    common(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("pipeline", help="run the copy-refinement stages and report sizes (JSON)")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--pattern", required=True)
    sp.add_argument("--eps", type=float, default=0.1)
    sp.add_argument("--trials", type=int, default=10**6, help="random role maps to try")
    sp.add_argument("--variant", choices=("treedepth", "expansion"), default="treedepth")
    common(sp)
    sp.set_defaults(func=cmd_pipeline)

    sp = sub.add_parser("treedepth", help="exact treedepth and an optimal tree embedding")
    sp.add_argument("--graph", required=True)
    sp.add_argument("--cap", type=int, default=DEFAULT_CAP, help="largest component size to solve exactly")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_treedepth)

    sp = sub.add_parser("selfcheck", help="compare fast routines with brute force")
    common(sp)
    sp.set_defaults(func=cmd_selfcheck)
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        for name in ("reps", "trials", "jobs"):
            if getattr(args, name, 1) < 1:
                raise UsageError(f"--{name} must be >= 1")
        if hasattr(args, "eps") and not 0 < args.eps <= 1:
            raise UsageError("--eps must lie in (0, 1]")
        return args.func(args)
    except (UsageError, GraphFormatError, TreedepthCapError, OSError) as e:
        print(f"htest: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        print(f"htest: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
