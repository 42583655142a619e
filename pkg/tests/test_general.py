import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mg1socp.conic import LinExpr
from mg1socp.general import GeneralContext, Variant, metric_constraint, tight_budget, tight_point
from mg1socp.model import ConicModel, eval_feasible
from mg1socp.queueing import MetricKind, QueueParams, metric


def setup(mu, sigma2, lam, y_binary=False, U=None):
    m = ConicModel()
    ctx = GeneralContext.standalone(m, mu, sigma2, lam, U=U, y_binary=y_binary, rhs=LinExpr.const(0.0))
    return m, ctx


def expected(ctx, aux, aux_coef, y_coef=None, x_coef=None):
    """Coefficient map sum_p aux_coef(p) a_p + y_coef(p, r) Y_pr + x_coef(p) X_p."""
    out = {}
    for p in range(ctx.n_options):
        out[aux[p]] = aux_coef(p)
        for r in range(ctx.lam.size):
            if y_coef is not None and y_coef(p, r) != 0:
                out[int(ctx.y_ids[p, r])] = y_coef(p, r)
        if x_coef is not None:
            out[int(ctx.x_ids[p])] = x_coef(p)
    return out


def test_l_r_form_mm1_example():
    m, ctx = setup([2.0], [0.25], [1.0])
    b = metric_constraint(m, ctx, "L", "R")
    assert b.budget.coefficients == {b.aux[0]: 0.5, int(ctx.y_ids[0, 0]): 0.5}


def test_w_s_form_md1_example():
    m, ctx = setup([2.0], [0.0], [1.0])
    b = metric_constraint(m, ctx, "W", "S")
    assert b.budget.coefficients == {b.aux[0]: 0.25, int(ctx.x_ids[0]): 0.5}


def test_l_s_form_tight_value():
    m, ctx = setup([2.0], [0.25], [1.0])
    b = metric_constraint(m, ctx, "L", "S")
    assert tight_budget(ctx, b, 0, [[1.0]]) == pytest.approx(1.0, rel=1e-15)


MUS = [2.0, 3.5, 7.0]
LAMS = [0.4, 1.1]


@pytest.mark.parametrize("queue", ["MM1", "MD1"])
def test_remark_forms(queue):
    mu = np.array(MUS)
    sigma2 = 1.0 / mu ** 2 if queue == "MM1" else np.zeros(3)
    lam = np.array(LAMS)
    mm1 = queue == "MM1"

    # L, R variant: (r + Lam)/mu and (r + 2 Lam)/(2 mu)
    m, ctx = setup(mu, sigma2, lam)
    b = metric_constraint(m, ctx, "L", "R")
    exp = expected(ctx, b.aux, lambda p: (1 / mu[p] if mm1 else 1 / (2 * mu[p])), lambda p, r: lam[r] / mu[p])
    assert b.budget.coefficients == pytest.approx(exp, rel=1e-15)
    assert set(b.budget.coefficients) == set(exp)

    # W, S variant: (s + X)/mu and (s + 2X)/(2 mu)
    for variant in ("S", "BinaryS"):
        m, ctx = setup(mu, sigma2, lam, y_binary=True)
        b = metric_constraint(m, ctx, "W", variant)
        exp = expected(ctx, b.aux, lambda p: (1 / mu[p] if mm1 else 1 / (2 * mu[p])), None, lambda p: 1 / mu[p])
        assert b.budget.coefficients == pytest.approx(exp, rel=1e-15)
        assert set(b.budget.coefficients) == set(exp)

    # L, S variant as printed: s/mu and (s + Lam)/(2 mu)
    m, ctx = setup(mu, sigma2, lam)
    b = metric_constraint(m, ctx, "L", "S", as_printed=True)
    exp = expected(ctx, b.aux, lambda p: (1 / mu[p] if mm1 else 1 / (2 * mu[p])),
                   None if mm1 else (lambda p, r: lam[r] / (2 * mu[p])))
    assert b.budget.coefficients == pytest.approx(exp, rel=1e-15)
    assert set(b.budget.coefficients) == set(exp)

    # L, S variant corrected: s and s/2 + Lam/(2 mu); no residual sigma terms
    m, ctx = setup(mu, sigma2, lam)
    b = metric_constraint(m, ctx, "L", "S")
    exp = expected(ctx, b.aux, lambda p: (1.0 if mm1 else 0.5),
                   None if mm1 else (lambda p, r: lam[r] / (2 * mu[p])))
    assert b.budget.coefficients == pytest.approx(exp, rel=1e-15)
    assert set(b.budget.coefficients) == set(exp)


def test_as_printed_fails_identity():
    m, ctx = setup([2.0], [0.25], [1.0])
    b = metric_constraint(m, ctx, "L", "S", as_printed=True)
    assert tight_budget(ctx, b, 0, [[1.0]]) != pytest.approx(1.0, rel=1e-3)


def test_r_variant_has_no_w_form():
    m, ctx = setup([2.0], [0.25], [1.0])
    with pytest.raises(ValueError):
        metric_constraint(m, ctx, "W", "R")
    assert len(m.variables) == 2     # nothing added


def test_binary_s_needs_binary_y():
    m, ctx = setup([2.0], [0.25], [1.0])
    with pytest.raises(ValueError):
        metric_constraint(m, ctx, "L", "BinaryS")


def test_side_conditions():
    m, ctx = setup([2.0, 3.0], [0.1, 0.1], [1.0, 0.5], U=[[1.0, 0.5], [1.0, 1.0]])
    b = metric_constraint(m, ctx, "L", "S")
    assert len(b.linear_eqs) == 1 and len(b.linear_ineqs) == 1 + 4 + 1
    assert len(b.hyperbolic) == 2 and len(m.soc_primary) == 2 and not m.soc_secondary


queue = st.tuples(st.floats(0.5, 20.0), st.floats(0.0, 0.95), st.floats(0.0, 3.0))
KINDS = [(MetricKind.L, "R"), (MetricKind.L, "S"), (MetricKind.TW, "S"), (MetricKind.W, "S"),
         (MetricKind.LQ, "R"), (MetricKind.LQ, "S"), (MetricKind.TWQ, "S"), (MetricKind.WQ, "S"),
         (MetricKind.W, "BinaryS"), (MetricKind.L, "BinaryS")]


@given(queue, st.sampled_from(KINDS), st.integers(1, 4))
@settings(max_examples=200, deadline=None)
def test_tight_budget_is_metric(q, kv, n_r):
    """At tight auxiliaries each budget equals the direct metric of the chosen option."""
    mu, rho, cv = q
    kind, variant = kv
    lam = np.full(n_r, rho * mu / n_r)
    m, ctx = setup([mu, mu + 1.0], [(cv / mu) ** 2, 0.3], lam, y_binary=variant == "BinaryS")
    b = metric_constraint(m, ctx, kind, variant)
    y = np.zeros((2, n_r))
    y[0] = 1.0
    got = tight_budget(ctx, b, 0, y)
    want = metric(kind, QueueParams(rho * mu, mu, cv / mu))
    assert got == pytest.approx(want, rel=1e-9, abs=1e-12)


@given(queue, st.sampled_from(KINDS))
@settings(max_examples=60, deadline=None)
def test_tight_point_is_feasible(q, kv):
    mu, rho, cv = q
    kind, variant = kv
    m = ConicModel()
    ctx = GeneralContext.standalone(m, [mu], [(cv / mu) ** 2], [rho * mu], y_binary=variant == "BinaryS")
    b = metric_constraint(m, ctx, kind, variant)
    p = tight_point(ctx, b, 0, [[1.0]])
    (rh,) = ctx.rhs.coefficients
    p[rh] = tight_budget(ctx, b, 0, [[1.0]]) * (1 + 1e-12) + 1e-12
    assert eval_feasible(m, p, tol=1e-7) == (True, [])
    p[rh] -= 1e-3 * (1 + abs(p[rh]))
    assert not eval_feasible(m, p, tol=1e-7)[0]
