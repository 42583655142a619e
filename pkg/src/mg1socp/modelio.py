"""Model dumps (JSON) and Conic Benchmark Format export.

JSON layout::

    {"variables": [{"id", "name", "kind", "lower", "upper"}, ...],
     "objective": <expr>, "linear_eqs": [<expr>], "linear_ineqs": [<expr>],
     "soc_primary": [{"norm_rows": [<expr>], "rhs": <expr>}],
     "soc_secondary": [{"form": "FormI"|"FormII", "quad_rows": [<expr>], "y": <expr>, "z": <expr>|null}],
     "metadata": {str: str}}

with ``<expr> = {"terms": [[id, coef], ...], "constant": c}``. Infinite
bounds are written as ``null``. Floats use the shortest repr that round-trips
exactly, so ``loads(dumps(m))`` reproduces every bit.
"""
from __future__ import annotations

import json
import math

from mg1socp.conic import LinExpr, SocConstraintPrimary, SocConstraintSecondary, SocForm
from mg1socp.model import ConicModel, Variable, VarKind


def _expr_out(e: LinExpr) -> dict:
    return {"terms": [[k, v] for k, v in e.coefficients.items()], "constant": e.constant}


def _expr_in(d: dict) -> LinExpr:
    out = LinExpr()
    out.coefficients = {int(k): float(v) for k, v in d["terms"]}
    out.constant = float(d["constant"])
    return out


def _bound_out(v: float):
    return None if math.isinf(v) else v


def model_to_dict(m: ConicModel) -> dict:
    return {
        "variables": [
            {"id": v.id, "name": v.name, "kind": v.kind.value,
             "lower": _bound_out(v.lower), "upper": _bound_out(v.upper)}
            for v in m.variables
        ],
        "objective": _expr_out(m.objective),
        "linear_eqs": [_expr_out(e) for e in m.linear_eqs],
        "linear_ineqs": [_expr_out(e) for e in m.linear_ineqs],
        "soc_primary": [
            {"norm_rows": [_expr_out(r) for r in c.norm_rows], "rhs": _expr_out(c.rhs)}
            for c in m.soc_primary
        ],
        "soc_secondary": [
            {"form": c.form.value, "quad_rows": [_expr_out(r) for r in c.quad_rows],
             "y": _expr_out(c.y), "z": None if c.z is None else _expr_out(c.z)}
            for c in m.soc_secondary
        ],
        "metadata": dict(m.metadata),
    }


def model_from_dict(d: dict) -> ConicModel:
    variables = [
        Variable(int(v["id"]), v["name"], VarKind(v["kind"]),
                 -math.inf if v["lower"] is None else float(v["lower"]),
                 math.inf if v["upper"] is None else float(v["upper"]))
        for v in d["variables"]
    ]
    return ConicModel(
        variables=variables,
        objective=_expr_in(d["objective"]),
        linear_eqs=[_expr_in(e) for e in d["linear_eqs"]],
        linear_ineqs=[_expr_in(e) for e in d["linear_ineqs"]],
        soc_primary=[
            SocConstraintPrimary(tuple(_expr_in(r) for r in c["norm_rows"]), _expr_in(c["rhs"]))
            for c in d["soc_primary"]
        ],
        soc_secondary=[
            SocConstraintSecondary(SocForm(c["form"]), tuple(_expr_in(r) for r in c["quad_rows"]),
                                   _expr_in(c["y"]), None if c["z"] is None else _expr_in(c["z"]))
            for c in d["soc_secondary"]
        ],
        metadata={str(k): str(v) for k, v in d["metadata"].items()},
    )


def dumps(m: ConicModel) -> str:
    return json.dumps(model_to_dict(m), separators=(",", ":")) + "\n"


def loads(text: str) -> ConicModel:
    return model_from_dict(json.loads(text))


def to_cbf(m: ConicModel) -> str:
    """Render the primary-form model in Conic Benchmark Format (version 3).

    All variables are declared free; finite bounds become ``L-``/``L+``
    rows. Each primary SOC row becomes one ``Q`` block ``(rhs, norm rows)``.
    Secondary rows are not exported.
    """
    rows: list[tuple[str, LinExpr]] = []
    rows += [("L=", e) for e in m.linear_eqs]
    rows += [("L-", e) for e in m.linear_ineqs]
    for v in m.variables:
        if math.isfinite(v.upper):
            rows.append(("L-", LinExpr({v.id: 1.0}, -v.upper)))
    for v in m.variables:
        if math.isfinite(v.lower):
            rows.append(("L+", LinExpr({v.id: 1.0}, -v.lower)))

    chunks: list[list] = []
    for cone, e in rows:
        if chunks and chunks[-1][0] == cone:
            chunks[-1][1] += 1
        else:
            chunks.append([cone, 1])
    flat = [e for _, e in rows]
    for c in m.soc_primary:
        block = [c.rhs, *c.norm_rows]
        chunks.append(["Q", len(block)])
        flat.extend(block)

    acoord = [(i, k, v) for i, e in enumerate(flat) for k, v in sorted(e.coefficients.items())]
    bcoord = [(i, e.constant) for i, e in enumerate(flat) if e.constant != 0.0]
    ints = [v.id for v in m.variables if v.kind is VarKind.BINARY]
    n = len(m.variables)

    out = []
    for k, v in sorted(m.metadata.items()):
        out.append(f"# {k}: {v}")
    out += ["VER", "3", "", "OBJSENSE", "MIN", ""]
    out += ["VAR", f"{n} {1 if n else 0}"]
    if n:
        out.append(f"F {n}")
    out.append("")
    if ints:
        out += ["INT", str(len(ints)), *map(str, ints), ""]
    if flat:
        out += ["CON", f"{len(flat)} {len(chunks)}", *(f"{c} {k}" for c, k in chunks), ""]
    obj = sorted(m.objective.coefficients.items())
    if obj:
        out += ["OBJACOORD", str(len(obj)), *(f"{k} {v!r}" for k, v in obj), ""]
    if m.objective.constant != 0.0:
        out += ["OBJBCOORD", repr(m.objective.constant), ""]
    if acoord:
        out += ["ACOORD", str(len(acoord)), *(f"{i} {k} {v!r}" for i, k, v in acoord), ""]
    if bcoord:
        out += ["BCOORD", str(len(bcoord)), *(f"{i} {v!r}" for i, v in bcoord), ""]
    return "\n".join(out) + "\n"
