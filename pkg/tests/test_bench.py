import math

import pytest

from conftest import random_instance
from mg1socp.bench import (
    CSV_COLUMNS,
    BenchRow,
    bound_order_flags,
    from_csv,
    percent_sum_ok,
    run_bench,
    solve_instance,
    to_csv,
)
from mg1socp.location import brute_force
from mg1socp.solver import SolverConfig


@pytest.fixture(scope="module")
def rows():
    items = [(f"r{s}", random_instance(s)) for s in range(2)]
    return run_bench(items, config=SolverConfig(time_limit=60))


def test_rows_in_input_order(rows):
    assert [(r.instance, r.formulation) for r in rows] == [
        (f"r{s}", f"M{k}") for s in range(2) for k in range(1, 5)]


def test_rows_verified_and_partitioned(rows):
    for r in rows:
        assert r.status == "Optimal" and r.verified and not r.note
        assert percent_sum_ok(r)
        assert abs(r.establish_pct + r.waiting_pct + r.traveling_pct - 100) <= 0.05


def test_rows_match_oracle(rows):
    for r in rows:
        inst = random_instance(int(r.instance[1:]))
        assert r.total_cost == pytest.approx(brute_force(inst).value, rel=1e-6)


def test_no_bound_flags(rows):
    assert bound_order_flags(rows) == []


def test_bound_flags_detect():
    mk = lambda f, rb: BenchRow("a", f, "Optimal", 1, 1, 1, 98, rb, 0, 0, 0.0, 0.0)   # noqa: E731
    flags = bound_order_flags([mk("M1", 10.0), mk("M2", 10.5), mk("M4", 9.0)])
    assert len(flags) == 2


def test_csv_round_trip(rows):
    text = to_csv(rows)
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    back = from_csv(text)
    assert to_csv(back) == text
    assert [(b.instance, b.total_cost, b.nodes) for b in back] == [(r.instance, r.total_cost, r.nodes) for r in rows]


def test_csv_header_exact():
    assert ",".join(CSV_COLUMNS) == ("instance,formulation,status,total_cost,establish_pct,waiting_pct,"
                                     "traveling_pct,root_bound,nodes,cuts,wall_time_s,gap")


def test_csv_bad_header():
    with pytest.raises(ValueError):
        from_csv("a,b\n")


def test_solve_instance_relaxed_is_lower_bound():
    inst = random_instance(6)
    full = solve_instance(inst, "M1")
    relaxed = solve_instance(inst, "M3", relax_assignments=True)
    assert full.verified and relaxed.verified
    assert relaxed.result.primal <= full.result.primal + 1e-6 * abs(full.result.primal)


def test_error_row_recorded():
    from mg1socp.bench import bench_row
    inst = random_instance(0)
    inst.lam = inst.lam * 100            # no feasible assignment
    row = bench_row("x", inst, "M1", SolverConfig())
    assert row.status in ("Infeasible", "Error")
    assert math.isnan(row.total_cost)
