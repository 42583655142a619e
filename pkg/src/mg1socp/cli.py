"""Command-line entry point: ``mg1socp {gen,solve,oracle,bench,export,simulate}``.

Exit codes: 0 success, 2 usage or I/O error, 3 infeasible instance or
unstable queue, 4 verification mismatch, 5 resource limit (time/node limit,
oracle size guard).
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from mg1socp import instances, modelio
from mg1socp.bench import (
    DEFAULT_TIME_LIMIT,
    bound_order_flags,
    format_table,
    percent_sum_ok,
    run_bench,
    solve_instance,
    to_csv,
)
from mg1socp.errors import (
    InstanceTooLargeError,
    InvalidDistributionError,
    InvalidInstanceError,
    InvalidSpecError,
    NoFeasibleAssignmentError,
    UnstableQueueError,
)
from mg1socp.location import LocationInstance, brute_force
from mg1socp.queueing import MetricKind, QueueParams, ServiceDist, metric, simulate
from mg1socp.reformulations import Formulation, build
from mg1socp.solver import SolverConfig, SolveStatus

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_MISMATCH = 4
EXIT_LIMIT = 5


class _Fail(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _load_instance(path: str) -> LocationInstance:
    try:
        return LocationInstance.load(path)
    except FileNotFoundError:
        raise _Fail(EXIT_USAGE, f"no such instance file: {path}")
    except (OSError, ValueError, KeyError) as exc:
        raise _Fail(EXIT_USAGE, f"cannot read instance {path}: {exc}")


def _config(args, **extra) -> SolverConfig:
    kw = dict(seed=args.seed, rel_gap=args.gap, time_limit=args.time_limit, **extra)
    if args.threads is not None:
        kw["threads"] = args.threads
    if getattr(args, "node_limit", None) is not None:
        kw["node_limit"] = args.node_limit
    try:
        return SolverConfig(**kw)
    except ValueError as exc:
        raise _Fail(EXIT_USAGE, str(exc))


def _write(path: str, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise _Fail(EXIT_USAGE, f"cannot write {path}: {exc}")


# -- commands ------------------------------------------------------------------

def cmd_gen(args) -> int:
    try:
        spec = instances.preset(args.preset, args.seed)
        if args.facilities or args.customers or args.levels:
            spec = instances.GenSpec(
                n_facilities=args.facilities or spec.n_facilities,
                n_customers=args.customers or spec.n_customers,
                n_levels=args.levels or spec.n_levels,
                seed=args.seed, name=args.name or "custom")
        inst = instances.generate(spec)
    except InvalidSpecError as exc:
        raise _Fail(EXIT_USAGE, str(exc))
    out = args.output or instances.default_filename(spec)
    _write(out, inst.dumps())
    print(out)
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = _load_instance(args.instance)
    f = Formulation.parse(args.formulation)
    if args.relax_binaries and f is Formulation.M2:
        raise _Fail(EXIT_USAGE, "formulation 2 squares the assignment variables and needs them binary; "
                                "--relax-binaries is not allowed")
    try:
        run = solve_instance(inst, f, _config(args), relax_assignments=args.relax_binaries)
    except InvalidInstanceError as exc:
        raise _Fail(EXIT_USAGE, str(exc))
    res = run.result
    doc = res.to_dict()
    if not args.with_point:
        doc.pop("incumbent")
    doc.update(formulation=f.value, instance=args.instance, verified=run.verified,
               evaluated=run.breakdown.total if run.breakdown is not None else None)
    if run.assignment is not None:
        doc["assignment"] = run.assignment.to_dict()
    print(json.dumps(doc, sort_keys=True))
    if not args.quiet:
        rows = [("status", res.status.value), ("solver objective", f"{res.primal:.10g}"),
                ("direct cost", f"{run.breakdown.total:.10g}" if run.breakdown else "-"),
                ("dual bound", f"{res.dual_bound:.10g}"), ("gap %", f"{100 * res.gap:.6f}"),
                ("root bound", f"{res.root_bound:.10g}"), ("nodes", str(res.nodes)),
                ("cuts", str(res.cuts)), ("time s", f"{res.wall_time:.3f}")]
        if run.breakdown is not None:
            e, w, t = run.breakdown.percentages()
            rows += [("establishing %", f"{e:.2f}"), ("waiting %", f"{w:.2f}"), ("traveling %", f"{t:.2f}")]
        width = max(len(k) for k, _ in rows)
        for k, v in rows:
            print(f"{k:<{width}}  {v}")
        for p in run.problems:
            print(f"verification: {p}")
    if res.status is SolveStatus.INFEASIBLE:
        return EXIT_INFEASIBLE
    if res.incumbent is not None and not run.verified:
        return EXIT_MISMATCH
    if res.status in (SolveStatus.TIME_LIMIT, SolveStatus.GAP_LIMIT) and res.gap > args.gap:
        return EXIT_LIMIT
    return EXIT_OK


def cmd_oracle(args) -> int:
    inst = _load_instance(args.instance)
    try:
        r = brute_force(inst)
    except InstanceTooLargeError as exc:
        raise _Fail(EXIT_LIMIT, str(exc))
    except NoFeasibleAssignmentError as exc:
        raise _Fail(EXIT_INFEASIBLE, str(exc))
    print(json.dumps(r.to_dict(), sort_keys=True))
    return EXIT_OK


def cmd_bench(args) -> int:
    items = []
    for path in args.instances:
        items.append((Path(path).stem, _load_instance(path)))
    if args.preset:
        for s in range(args.seed, args.seed + args.count):
            spec = instances.preset(args.preset, s)
            items.append((Path(instances.default_filename(spec)).stem, instances.generate(spec)))
    if not items:
        raise _Fail(EXIT_USAGE, "no instances: pass files or --preset")
    forms = [Formulation.parse(f) for f in args.formulations.split(",")]
    rows = run_bench(items, forms, _config(args), jobs=args.jobs)
    print(format_table(rows))
    flags = bound_order_flags(rows)
    for fl in flags:
        print(f"bound order: {fl}")
    bad_pct = [r for r in rows if not percent_sum_ok(r)]
    for r in bad_pct:
        print(f"percentages: {r.instance} {r.formulation} do not sum to 100")
    if args.csv:
        _write(args.csv, to_csv(rows))
    if any(r.note and r.status != "Error" for r in rows) or bad_pct:
        return EXIT_MISMATCH
    return EXIT_OK


def cmd_export(args) -> int:
    inst = _load_instance(args.instance)
    m = build(inst, args.formulation).model
    text = modelio.dumps(m) if args.json else modelio.to_cbf(m)
    if args.output == "-":
        sys.stdout.write(text)
    else:
        _write(args.output, text)
        print(args.output)
    return EXIT_OK


def cmd_simulate(args) -> int:
    sigma = args.sigma
    if sigma is None:
        sigma = {"exponential": 1.0 / args.mu, "deterministic": 0.0}.get(args.dist)
        if sigma is None and args.cv is not None:
            sigma = args.cv / args.mu
        if sigma is None:
            raise _Fail(EXIT_USAGE, f"--sigma or --cv is required for {args.dist} service")
    try:
        p = QueueParams(args.lam, args.mu, sigma)
        est = simulate(p, ServiceDist(args.dist, args.high_prob), customers=args.customers,
                       warmup=args.warmup, seed=args.seed)
    except UnstableQueueError as exc:
        raise _Fail(EXIT_INFEASIBLE, str(exc))
    except InvalidDistributionError as exc:
        raise _Fail(EXIT_USAGE, str(exc))
    except ValueError as exc:
        raise _Fail(EXIT_USAGE, str(exc))
    print(f"{'metric':<6}  {'formula':>12}  {'simulated':>12}  {'half-width':>11}  inside")
    for kind in MetricKind:
        e = est[kind]
        v = metric(kind, p)
        print(f"{kind.value:<6}  {v:12.6f}  {e.mean:12.6f}  {e.half_width:11.6f}  {'yes' if e.contains(v) else 'no'}")
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def _solver_flags(p: argparse.ArgumentParser, time_limit: float) -> None:
    p.add_argument("--gap", type=float, default=1e-5, help="relative gap target (default 1e-5)")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: MG1SOCP_THREADS or 1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--time-limit", type=float, default=time_limit, help="seconds")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mg1socp", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log solver progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an instance file")
    g.add_argument("--preset", default="desk-small", help=f"one of {', '.join(sorted(instances.PRESETS))}")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--facilities", type=int)
    g.add_argument("--customers", type=int)
    g.add_argument("--levels", type=int)
    g.add_argument("--name", help="file-name stem for custom shapes")
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve one formulation and verify the result")
    s.add_argument("instance")
    s.add_argument("--formulation", "-f", default="1", choices=["1", "2", "3", "4"])
    s.add_argument("--relax-binaries", action="store_true",
                   help="continuous customer assignments (split demand); not valid for formulation 2")
    s.add_argument("--node-limit", type=int)
    s.add_argument("--with-point", action="store_true", help="include the full solver point in the JSON")
    s.add_argument("-q", "--quiet", action="store_true", help="JSON line only")
    _solver_flags(s, math.inf)
    s.set_defaults(func=cmd_solve)

    o = sub.add_parser("oracle", help="brute-force optimum of a small instance")
    o.add_argument("instance")
    o.set_defaults(func=cmd_oracle)

    b = sub.add_parser("bench", help="solve instances with several formulations and tabulate")
    b.add_argument("instances", nargs="*")
    b.add_argument("--preset", help="generate instances from this preset instead of / besides files")
    b.add_argument("--count", type=int, default=12, help="number of preset seeds")
    b.add_argument("--formulations", default="1,2,3,4")
    b.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    b.add_argument("--csv", help="also write the rows as CSV")
    _solver_flags(b, DEFAULT_TIME_LIMIT)
    b.set_defaults(func=cmd_bench)

    e = sub.add_parser("export", help="write a formulation in Conic Benchmark Format")
    e.add_argument("instance")
    e.add_argument("--formulation", "-f", default="1", choices=["1", "2", "3", "4"])
    e.add_argument("--json", action="store_true", help="write the JSON model dump instead")
    e.add_argument("-o", "--output", default="-")
    e.set_defaults(func=cmd_export)

    m = sub.add_parser("simulate", help="compare the M/G/1 formulas with a simulation")
    m.add_argument("--lam", type=float, required=True)
    m.add_argument("--mu", type=float, required=True)
    m.add_argument("--sigma", type=float)
    m.add_argument("--cv", type=float, help="coefficient of variation mu*sigma (alternative to --sigma)")
    m.add_argument("--dist", default="exponential", choices=["exponential", "deterministic", "uniform", "two_point"])
    m.add_argument("--high-prob", type=float, help="upper-atom probability of the two-point law")
    m.add_argument("--customers", type=int, default=1_000_000)
    m.add_argument("--warmup", type=int)
    m.add_argument("--seed", type=int, default=0)
    m.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except _Fail as exc:
        print(f"mg1socp {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
