import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_instance, tiny_instance
from mg1socp.conic import HyperbolicConstraint, LinExpr, SocForm, secondary_residual, secondary_to_primary, soc_residual
from mg1socp.errors import InfeasibleAssignmentError, NonIntegralPointError
from mg1socp.location import Assignment, LocationInstance, brute_force, check_feasible, evaluate
from mg1socp.model import VarKind, stats
from mg1socp.reformulations import (
    Formulation,
    base_model,
    build,
    extract,
    objective_identity_check,
    structural_compare,
    tight_point,
)
from mg1socp.solver import SolverConfig, solve

V = LinExpr.var


def test_parse():
    assert Formulation.parse("1") is Formulation.M1
    assert Formulation.parse("m3") is Formulation.M3
    with pytest.raises(ValueError):
        Formulation.parse("5")


def test_m1_large_counts():
    inst = random_instance(0, 25, 5, 4)
    diff = stats(build(inst, "M1").model) - stats(base_model(inst))
    assert (diff.continuous, diff.form1_rows, diff.linear_rows) == (250, 125, 125)
    assert diff.binary == 0 and diff.form2_rows == 0


def test_m4_counts():
    inst = random_instance(0, 2, 1, 2)
    diff = stats(build(inst, "M4").model) - stats(base_model(inst))
    assert (diff.continuous, diff.linear_rows) == (6, 4)


def test_m3_row_shape():
    inst = random_instance(0, 2, 1, 2)
    rc = build(inst, "M3")
    assert len(rc.model.soc_secondary) == 2
    for c in rc.model.soc_secondary:
        assert c.form is SocForm.FORM_I and len(c.quad_rows) == 2


def test_structural_compare_large():
    row = structural_compare(random_instance(0, 25, 5, 2))[Formulation.M3]
    assert (row.additional_reals, row.additional_constraints, row.form1_rows) == (375, 250, 125)


def test_structural_compare_unit():
    rows = structural_compare(random_instance(0, 1, 1, 1))
    got = [(r.additional_reals, r.additional_constraints, r.form1_rows) for r in rows.values()]
    assert got == [(2, 1, 1), (2, 1, 1), (3, 2, 1), (3, 2, 1)]


def test_structural_compare_empty():
    inst = LocationInstance(f=np.zeros((0, 2)), d=np.zeros((0, 0)), lam=[], mu=np.ones((0, 2)),
                            sigma=np.zeros((0, 2)), w=[])
    for r in structural_compare(inst).values():
        assert (r.additional_reals, r.additional_constraints, r.form1_rows, r.form2_rows) == (0, 0, 0, 0)


@given(st.integers(1, 6), st.integers(1, 4))
@settings(max_examples=15, deadline=None)
def test_structural_counts_symbolic(n_i, n_k):
    ik = n_i * n_k
    rows = structural_compare(random_instance(0, n_i, n_k, 2))
    expect = {Formulation.M1: (2 * ik, ik), Formulation.M2: (2 * ik, ik),
              Formulation.M3: (3 * ik, 2 * ik), Formulation.M4: (3 * ik, 2 * ik)}
    for f, r in rows.items():
        assert (r.additional_reals, r.additional_constraints) == expect[f]
        assert r.form1_rows == ik and r.form2_rows == 0


def test_var_map_total():
    rc = build(random_instance(1), "M3")
    ids = np.concatenate([a.ravel() for a in rc.var_map.values()])
    assert sorted(ids.tolist()) == list(range(len(rc.model.variables)))
    assert set(rc.aux) == {"s", "p", "q"}
    assert rc.model.variables[int(rc.aux["p"][0, 0])].lower == -math.inf


def _coeffs(e: LinExpr):
    return (dict(e.coefficients), e.constant)


@pytest.mark.parametrize("f", list(Formulation))
def test_hyperbolic_sources(f):
    inst = random_instance(2, 2, 2, 3)
    rc = build(inst, f)
    for (i, k), h in zip(itertools.product(range(2), range(2)), rc.hyperbolic):
        mu = float(inst.mu[i, k])
        load = {int(rc.y[i, k, j]): float(inst.lam[j]) for j in range(3)}
        idle = (load and {v: -c for v, c in load.items()}, mu)
        if f is Formulation.M1:
            assert [_coeffs(r) for r in h.x] == [(load, 0.0)]
            assert _coeffs(h.y) == ({int(rc.aux["r"][i, k]): 1.0}, 0.0)
        elif f is Formulation.M2:
            assert [_coeffs(r) for r in h.x] == [({int(rc.y[i, k, j]): math.sqrt(inst.lam[j])}, 0.0)
                                                 for j in range(3)]
            assert _coeffs(h.y) == ({int(rc.aux["s"][i, k]): 1.0}, 0.0)
        else:
            assert [_coeffs(r) for r in h.x] == [(load, 0.0)]
            busy = {int(rc.aux["s"][i, k]): mu, **{v: -c for v, c in load.items()}}
            assert _coeffs(h.y) == (busy, 0.0)
        assert _coeffs(h.z) == idle


@pytest.mark.parametrize("f", list(Formulation))
def test_primary_and_secondary_rows_agree(f):
    """Same verdict at random points that satisfy the linking equalities."""
    inst = random_instance(3, 2, 2, 3)
    rc = build(inst, f)
    m = rc.model
    rng = np.random.default_rng(1)
    for _ in range(300):
        p = dict(enumerate(rng.uniform(0, 1, len(m.variables))))
        for (i, k), _ in np.ndenumerate(rc.x):
            mu = float(inst.mu[i, k])
            load = rc.load_expr(i, k).evaluate(p)
            main = "r" if "r" in rc.aux else "s"
            a = rng.uniform(0, 3)
            p[int(rc.aux[main][i, k])] = a
            busy, idle = a * mu - load, mu - load
            derived = {"t": idle, "v": busy, "p": busy - idle, "q": busy + idle}
            for fam, val in derived.items():
                if fam in rc.aux:
                    p[int(rc.aux[fam][i, k])] = val
        assert all(abs(e.evaluate(p)) < 1e-9 for e in m.linear_eqs[inst.n_customers:])
        for prim, sec in zip(m.soc_primary, m.soc_secondary):
            a, b = soc_residual(prim, p), secondary_residual(sec, p)
            if abs(a) > 1e-9 and abs(b) > 1e-9:
                assert (a <= 0) == (b <= 0)


def test_secondary_bounds_provably_nonneg():
    from mg1socp.model import validate
    for f in Formulation:
        assert validate(build(random_instance(5), f).model) == []


def test_relaxed_assignments():
    inst = random_instance(0)
    rc = build(inst, "M1", relax_assignments=True)
    kinds = {rc.model.variables[int(v)].kind for v in rc.y.ravel()}
    assert kinds == {VarKind.CONTINUOUS}
    with pytest.raises(ValueError):
        build(inst, "M2", relax_assignments=True)


# -- extraction and identities --------------------------------------------------

def test_extract_tiny_m1():
    inst = tiny_instance()
    rc = build(inst, "M1")
    res = solve(rc.model, SolverConfig())
    ex = extract(rc, res.incumbent)
    assert evaluate(inst, ex.assignment) == pytest.approx(11.0)
    assert ex.aux["r"][0, 0] == pytest.approx(1.0, abs=1e-6)
    assert ex.max_gap() <= 1e-6


def test_extract_fractional():
    rc = build(tiny_instance(), "M1")
    p = tight_point(rc, Assignment([[1]], [[[1]]]))
    p[int(rc.y[0, 0, 0])] = 0.4
    with pytest.raises(NonIntegralPointError):
        extract(rc, p)


def test_zero_demand():
    inst = LocationInstance(f=[[3.0], [4.0]], d=[[1.0], [2.0]], lam=[0.0], mu=[[2.0], [2.0]],
                            sigma=[[0.5], [0.5]], w=[1.0, 1.0])
    for f in Formulation:
        rc = build(inst, f)
        res = solve(rc.model, SolverConfig())
        a = extract(rc, res.incumbent).assignment
        assert check_feasible(inst, a)[0]
        assert evaluate(inst, a) == pytest.approx(3.0)


@pytest.mark.parametrize("f", ["M1", "M2"])
def test_identity_tiny(f):
    rc = build(tiny_instance(), f)
    got = objective_identity_check(rc, Assignment([[1]], [[[1]]]))
    assert got == pytest.approx((11.0, 11.0), rel=1e-12)


def test_identity_empty_assignment():
    inst = LocationInstance(f=[[3.0, 5.0]], d=np.zeros((1, 0)), lam=np.zeros(0), mu=[[2.0, 4.0]],
                            sigma=[[0.5, 0.1]], w=[1.0])
    for f in Formulation:
        rc = build(inst, f)
        for x in ([[0, 0]], [[0, 1]]):
            a = Assignment(x, np.zeros((1, 2, 0)))
            v = float(np.sum(inst.f * np.array(x)))
            assert objective_identity_check(rc, a) == pytest.approx((v, v))


def test_identity_rejects_infeasible():
    with pytest.raises(InfeasibleAssignmentError):
        objective_identity_check(build(tiny_instance(), "M1"), Assignment([[0]], [[[1]]]))


@given(st.integers(0, 2**31), st.sampled_from(list(Formulation)), st.data())
@settings(max_examples=60, deadline=None)
def test_identity_random_assignment(seed, f, data):
    inst = random_instance(seed, 3, 2, 4)
    levels = [data.draw(st.sampled_from([None, 0, 1])) for _ in range(3)]
    open_ = [i for i in range(3) if levels[i] is not None]
    if not open_:
        return
    serve = [data.draw(st.sampled_from(open_)) for _ in range(4)]
    a = Assignment.from_choice(inst, levels, serve)
    if not check_feasible(inst, a)[0]:
        return
    got, direct = objective_identity_check(build(inst, f), a)
    assert got == pytest.approx(direct, rel=1e-9)
