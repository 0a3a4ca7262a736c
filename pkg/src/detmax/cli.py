"""``detmax`` command line.

Exit codes: 0 success, 1 a checked invariant failed, 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import glob
import io
import json
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor

from detmax import generators, verify
from detmax.exchange_graph import build
from detmax.instance import SchemaError, dumps, instance_to_dict, load_instance
from detmax.local_search import InvariantViolation, SolveConfig, solve
from detmax.oracle import GuardExceeded, brute_force_opt

EXIT_OK, EXIT_INVARIANT, EXIT_INPUT = 0, 1, 2
BENCH_FIELDS = ["path", "n", "d", "r", "iterations", "wall_s", "log_det_ln", "oracle_log_det_ln", "gap_ln", "error"]


def _finite_or_none(x):
    return x if x is not None and math.isfinite(x) else None


def _emit(doc) -> None:
    sys.stdout.write(dumps(doc))


def cmd_solve(args) -> int:
    inst = load_instance(args.path)
    config = SolveConfig(max_iters=args.max_iters, use_sparsify=not args.no_sparsify, seed=args.seed)
    report = solve(inst, config)
    if args.dump_graph and report.final_set:
        graph = build(inst, report.final_set)
        with open(args.dump_graph, "w") as fh:
            fh.write(dumps(graph.to_json_dict()))
    _emit(report.to_dict())
    return EXIT_OK


def cmd_oracle(args) -> int:
    inst = load_instance(args.path)
    res = brute_force_opt(inst, exact=args.exact_oracle)
    doc = {
        "best_set": None if res.best_set is None else list(res.best_set),
        "log_det_ln": _finite_or_none(res.log_det),
        "value": 0 if res.best_set is None else (float(res.exact_det) if res.exact_det is not None else math.exp(res.log_det)),
        "bases": res.bases_seen,
        "exact": args.exact_oracle,
    }
    if res.exact_det is not None:
        doc["exact_det"] = str(res.exact_det)
    _emit(doc)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.path:
        results = verify.verify_instance(load_instance(args.path), seed=args.seed)
    else:
        names = list(verify.SUITES) if args.suite in (None, "all") else [args.suite]
        if any(n not in verify.SUITES for n in names):
            raise SchemaError(f"unknown suite {args.suite!r}; choose from all, {', '.join(verify.SUITES)}")
        results = []
        for name in names:
            extra = {"lmax": args.lmax} if name == "permanent-bound" and args.lmax else {}
            results.append(verify.run_suite(name, args.trials, args.seed, **extra))
    passed = all(r.passed for r in results)
    _emit({"passed": passed, "suites": [r.to_dict() for r in results]})
    for r in results:
        if not r.passed:
            print(f"FAIL {r.name}: {r.failures[0]}", file=sys.stderr)
    return EXIT_OK if passed else EXIT_INVARIANT


def cmd_gen(args) -> int:
    params = {
        "random-uniform": dict(n=args.n, d=args.d, r=args.r),
        "random-partition": dict(n=args.n, d=args.d, parts=args.parts, capacity=args.capacity),
        "nsw": dict(players=args.players, items=args.items),
        "network": dict(p=args.p, extra=args.extra, budget=args.budget),
        "adversarial-collinear": dict(d=args.d, n=args.n),
    }[args.kind]
    required = {"random-uniform": ("n", "d", "r"), "random-partition": ("n", "d", "parts"),
                "nsw": ("players", "items"), "network": ("p",), "adversarial-collinear": ("d",)}[args.kind]
    missing = [k for k in required if params.get(k) is None]
    if missing:
        raise SchemaError(f"gen {args.kind} needs --{' --'.join(missing)}")
    try:
        inst = generators.generate(args.kind, seed=args.seed, **params)
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc
    _emit(instance_to_dict(inst))
    return EXIT_OK


def _bench_row(path: str, with_oracle: bool, sparsify: bool) -> dict:
    row = dict.fromkeys(BENCH_FIELDS)
    row["path"] = path
    try:
        inst = load_instance(path)
        row.update(n=inst.n, d=inst.dim, r=inst.rank)
        start = time.perf_counter()
        report = solve(inst, SolveConfig(use_sparsify=sparsify))
        row["wall_s"] = round(time.perf_counter() - start, 6)
        row["iterations"] = report.iterations
        row["log_det_ln"] = _finite_or_none(report.log_det)
        if with_oracle:
            try:
                opt = brute_force_opt(inst)
            except GuardExceeded as exc:
                row["error"] = f"oracle skipped: {exc}"
            else:
                row["oracle_log_det_ln"] = _finite_or_none(opt.log_det)
                if opt.best_set is None:
                    row["gap_ln"] = 0.0
                elif math.isfinite(report.log_det):
                    row["gap_ln"] = opt.log_det - report.log_det
    except Exception as exc:  # recorded per row, never fatal
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def cmd_bench(args) -> int:
    paths = sorted(glob.glob(args.pattern, recursive=True))
    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        rows = list(pool.map(lambda p: _bench_row(p, args.with_oracle, not args.no_sparsify), paths))
    if args.format == "json":
        _emit(rows)
    else:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=BENCH_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="detmax", description="Determinant maximization under matroid constraints.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("solve", help="run the local search on an instance file")
    p.add_argument("path")
    p.add_argument("--no-sparsify", action="store_true", help="skip support restriction")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--dump-graph", metavar="FILE", help="write the final exchange graph as JSON")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("oracle", help="brute-force optimum of a small instance")
    p.add_argument("path")
    p.add_argument("--exact-oracle", action="store_true", help="rational determinants")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("verify", help="run invariant suites, or all checks on one instance")
    p.add_argument("path", nargs="?")
    p.add_argument("--suite", help=f"all, {', '.join(verify.SUITES)}")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lmax", type=int, default=None, help="largest order for permanent-bound")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen", help="print a generated instance file")
    p.add_argument("kind", choices=generators.KINDS)
    p.add_argument("--seed", type=int, default=0)
    for name in ("n", "d", "r", "parts", "capacity", "players", "items", "p", "extra", "budget"):
        p.add_argument(f"--{name}", type=int, default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", help="solve every instance matching a glob and tabulate")
    p.add_argument("pattern")
    p.add_argument("--with-oracle", action="store_true")
    p.add_argument("--no-sparsify", action="store_true")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--workers", type=int, default=4)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (SchemaError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except GuardExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
