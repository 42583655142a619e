"""Solve-and-verify pipeline and the benchmark table.

``solve_instance`` builds a formulation, solves it, maps the incumbent back
to an assignment and re-prices that assignment with the direct cost
function. ``run_bench`` does this for every (instance, formulation) pair,
adds the converged root bound and checks the root-bound ordering between
formulations.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from mg1socp.errors import InfeasibleAssignmentError, NonIntegralPointError
from mg1socp.location import CostBreakdown, LocationInstance, check_feasible, cost_breakdown, split_cost_breakdown
from mg1socp.reformulations import BuildReceipt, Formulation, branching_priorities, build, extract, rounding_heuristic
from mg1socp.solver import SolveResult, SolverConfig, SolveStatus, root_bound, solve

VERIFY_TOL = 1e-6
BOUND_TOL = 1e-5
DEFAULT_TIME_LIMIT = 60.0

CSV_COLUMNS = ("instance", "formulation", "status", "total_cost", "establish_pct", "waiting_pct",
               "traveling_pct", "root_bound", "nodes", "cuts", "wall_time_s", "gap")


@dataclass
class InstanceSolve:
    receipt: BuildReceipt
    result: SolveResult
    breakdown: CostBreakdown | None = None
    assignment: object = None           # Assignment, or None for relaxed/no incumbent
    problems: list[str] = field(default_factory=list)

    @property
    def verified(self) -> bool:
        return self.breakdown is not None and not self.problems

    @property
    def mismatch(self) -> float:
        if self.breakdown is None:
            return math.nan
        t = self.breakdown.total
        return abs(t - self.result.primal) / max(abs(t), 1e-10)


def solve_instance(inst: LocationInstance, formulation, config: SolverConfig | None = None,
                   relax_assignments: bool = False) -> InstanceSolve:
    receipt = build(inst, formulation, relax_assignments=relax_assignments)
    config = config or SolverConfig()
    heuristic = None if relax_assignments else rounding_heuristic(receipt)
    res = solve(receipt.model, config, heuristic=heuristic, priorities=branching_priorities(receipt))
    out = InstanceSolve(receipt, res)
    if res.incumbent is None:
        return out
    try:
        if relax_assignments:
            xv = np.vectorize(lambda v: res.incumbent[int(v)], otypes=[float])(receipt.x)
            yv = np.vectorize(lambda v: res.incumbent[int(v)], otypes=[float])(receipt.y)
            out.breakdown = split_cost_breakdown(inst, xv, yv)
        else:
            ex = extract(receipt, res.incumbent)
            ok, bad = check_feasible(inst, ex.assignment)
            if not ok:
                out.problems.extend(bad)
                return out
            out.assignment = ex.assignment
            out.breakdown = cost_breakdown(inst, ex.assignment)
    except (NonIntegralPointError, InfeasibleAssignmentError, ValueError) as exc:
        out.problems.append(str(exc))
        return out
    if not out.mismatch <= VERIFY_TOL:
        out.problems.append(f"solver objective {res.primal!r} differs from direct cost "
                            f"{out.breakdown.total!r} (relative {out.mismatch:.3g})")
    return out


@dataclass
class BenchRow:
    instance: str
    formulation: str
    status: str
    total_cost: float
    establish_pct: float
    waiting_pct: float
    traveling_pct: float
    root_bound: float
    nodes: int
    cuts: int
    wall_time_s: float
    gap: float
    verified: bool = False
    note: str = ""

    def csv_values(self) -> list[str]:
        out = []
        for name in CSV_COLUMNS:
            v = getattr(self, name)
            out.append(repr(float(v)) if isinstance(v, float) else str(v))
        return out


def bench_row(name: str, inst: LocationInstance, formulation, config: SolverConfig) -> BenchRow:
    f = Formulation.parse(formulation)
    try:
        rb = root_bound(build(inst, f).model, config)
        run = solve_instance(inst, f, config)
    except Exception as exc:    # recorded in the row, the table goes on
        return BenchRow(name, f.value, "Error", math.nan, math.nan, math.nan, math.nan, math.nan,
                        0, 0, 0.0, math.nan, note=f"{type(exc).__name__}: {exc}")
    res = run.result
    pct = run.breakdown.percentages() if run.breakdown is not None else (math.nan,) * 3
    total = run.breakdown.total if run.breakdown is not None else math.nan
    return BenchRow(name, f.value, res.status.value, total, *pct, rb, res.nodes, res.cuts,
                    res.wall_time, res.gap, verified=run.verified, note="; ".join(run.problems))


def _row_job(args):
    return bench_row(*args)


def bound_order_flags(rows: list[BenchRow], tol: float = BOUND_TOL) -> list[str]:
    """Instances where the M1 and M4 root bounds differ or M2 exceeds M1."""
    by = {}
    for r in rows:
        by.setdefault(r.instance, {})[r.formulation] = r.root_bound
    flags = []
    for name, b in by.items():
        m1, m2, m4 = b.get("M1"), b.get("M2"), b.get("M4")
        if m1 is None or not math.isfinite(m1):
            continue
        scale = max(abs(m1), 1e-10)
        if m4 is not None and abs(m1 - m4) / scale > tol:
            flags.append(f"{name}: root(M1)={m1:.10g} and root(M4)={m4:.10g} differ")
        if m2 is not None and m2 - m1 > tol * scale:
            flags.append(f"{name}: root(M2)={m2:.10g} exceeds root(M1)={m1:.10g}")
    return flags


def run_bench(instances, formulations=tuple(Formulation), config: SolverConfig | None = None,
              jobs: int = 1) -> list[BenchRow]:
    """``instances`` is a list of ``(name, LocationInstance)``. Rows come back
    in input order whatever the completion order."""
    if config is None:
        config = SolverConfig(time_limit=DEFAULT_TIME_LIMIT)
    tasks = [(name, inst, f, config) for name, inst in instances for f in formulations]
    if jobs <= 1:
        return [_row_job(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_row_job, tasks))


def to_csv(rows: list[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.csv_values())
    return buf.getvalue()


def from_csv(text: str) -> list[BenchRow]:
    rows = []
    rd = csv.reader(io.StringIO(text))
    header = next(rd)
    if tuple(header) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {header}")
    for vals in rd:
        d = dict(zip(CSV_COLUMNS, vals))
        rows.append(BenchRow(
            d["instance"], d["formulation"], d["status"],
            *(float(d[c]) for c in ("total_cost", "establish_pct", "waiting_pct", "traveling_pct", "root_bound")),
            int(d["nodes"]), int(d["cuts"]), float(d["wall_time_s"]), float(d["gap"])))
    return rows


def format_table(rows: list[BenchRow]) -> str:
    head = ("instance", "form", "status", "total cost", "estab %", "wait %", "travel %",
            "root bound", "nodes", "cuts", "time s", "gap %")
    lines = []
    for r in rows:
        lines.append((r.instance, r.formulation, r.status, f"{r.total_cost:.4f}", f"{r.establish_pct:.2f}",
                      f"{r.waiting_pct:.2f}", f"{r.traveling_pct:.2f}", f"{r.root_bound:.4f}", str(r.nodes),
                      str(r.cuts), f"{r.wall_time_s:.2f}", f"{100 * r.gap:.4f}"))
    widths = [max(len(h), *(len(l[c]) for l in lines)) if lines else len(h) for c, h in enumerate(head)]
    out = ["  ".join(h.rjust(wd) for h, wd in zip(head, widths))]
    out += ["  ".join(v.rjust(wd) for v, wd in zip(l, widths)) for l in lines]
    for r in rows:
        if r.note:
            out.append(f"! {r.instance} {r.formulation}: {r.note}")
    return "\n".join(out)


def percent_sum_ok(row: BenchRow, tol: float = 0.05) -> bool:
    if row.status != SolveStatus.OPTIMAL.value:
        return True
    return abs(row.establish_pct + row.waiting_pct + row.traveling_pct - 100.0) <= tol


__all__ = ["BenchRow", "CSV_COLUMNS", "InstanceSolve", "bench_row", "bound_order_flags", "format_table",
           "from_csv", "percent_sum_ok", "run_bench", "solve_instance", "to_csv"]
