"""Valid strengthening rows derived from the linear part of a model.

Implied-bound lifting: when every variable of a knapsack row
``sum a_j y_j <= b`` (``a_j > 0``, ``y_j >= 0``) has a variable upper bound
``y_j <= x`` on one common binary ``x``, the row also holds as
``sum a_j y_j <= b x``: with ``x = 0`` all ``y_j`` vanish, with ``x = 1`` it
is the original row. The lifted row cuts off fractional points where ``x``
is small but the load is not.
"""
from __future__ import annotations

from mg1socp.conic import LinExpr
from mg1socp.model import ConicModel, VarKind


def variable_upper_bounds(m: ConicModel) -> dict[int, set[int]]:
    """``y -> {x}`` for every row ``y - x <= 0`` with ``x`` binary."""
    binary = {v.id for v in m.variables if v.kind is VarKind.BINARY}
    vub: dict[int, set[int]] = {}
    for e in m.linear_ineqs:
        if e.constant != 0.0 or len(e.coefficients) != 2:
            continue
        (a, ca), (b, cb) = e.coefficients.items()
        if ca == 1.0 and cb == -1.0 and b in binary:
            vub.setdefault(a, set()).add(b)
        elif cb == 1.0 and ca == -1.0 and a in binary:
            vub.setdefault(b, set()).add(a)
    return vub


def implied_bound_rows(m: ConicModel) -> list[LinExpr]:
    vub = variable_upper_bounds(m)
    lower = [v.lower for v in m.variables]
    out = []
    for e in m.linear_ineqs:
        b = -e.constant
        if b <= 0 or len(e.coefficients) < 2:
            continue
        if any(c <= 0 or lower[k] < 0 for k, c in e.coefficients.items()):
            continue
        common = None
        for k in e.coefficients:
            ubs = vub.get(k)
            if not ubs:
                common = set()
                break
            common = set(ubs) if common is None else common & ubs
            if not common:
                break
        if not common:
            continue
        x = min(common)
        if x in e.coefficients:
            continue
        out.append(LinExpr(e.coefficients) - b * LinExpr.var(x))
    return out
