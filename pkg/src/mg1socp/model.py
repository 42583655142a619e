"""Generic MISOCP container shared by the reformulation builders and the solver."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Mapping

from mg1socp.conic import (
    LinExpr,
    SocConstraintPrimary,
    SocConstraintSecondary,
    SocForm,
    is_nonneg_combination,
    secondary_residual,
    soc_residual,
)
from mg1socp.errors import MissingAssignmentError

FEAS_TOL = 1e-6
INT_TOL = 1e-6


class VarKind(str, Enum):
    CONTINUOUS = "Continuous"
    BINARY = "Binary"


@dataclass(frozen=True)
class Variable:
    id: int
    name: str
    kind: VarKind = VarKind.CONTINUOUS
    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "kind", VarKind(self.kind))
        if self.kind is VarKind.BINARY and (self.lower, self.upper) != (0.0, 1.0):
            raise ValueError(f"binary variable {self.name} must have bounds [0, 1]")
        if self.lower > self.upper:
            raise ValueError(f"variable {self.name}: lower > upper")


@dataclass
class ConicModel:
    """Minimize ``objective`` subject to linear and conic rows.

    Linear rows are stored as expressions: ``expr == 0`` in ``linear_eqs`` and
    ``expr <= 0`` in ``linear_ineqs``. When both ``soc_primary`` and
    ``soc_secondary`` are filled they describe the same cones index by index.
    """

    variables: list[Variable] = field(default_factory=list)
    objective: LinExpr = field(default_factory=LinExpr)
    linear_eqs: list[LinExpr] = field(default_factory=list)
    linear_ineqs: list[LinExpr] = field(default_factory=list)
    soc_primary: list[SocConstraintPrimary] = field(default_factory=list)
    soc_secondary: list[SocConstraintSecondary] = field(default_factory=list)
    metadata: dict[str, str] = field(default_factory=dict)

    def add_variable(self, name: str, kind: VarKind = VarKind.CONTINUOUS,
                     lower: float = -math.inf, upper: float = math.inf) -> int:
        vid = len(self.variables)
        if VarKind(kind) is VarKind.BINARY:
            lower, upper = 0.0, 1.0
        self.variables.append(Variable(vid, name, kind, float(lower), float(upper)))
        return vid

    def add_binary(self, name: str) -> int:
        return self.add_variable(name, VarKind.BINARY)

    def add_eq(self, expr: LinExpr) -> None:
        self.linear_eqs.append(expr)

    def add_ineq(self, expr: LinExpr) -> None:
        self.linear_ineqs.append(expr)

    def add_cone(self, primary: SocConstraintPrimary | None = None,
                 secondary: SocConstraintSecondary | None = None) -> None:
        if primary is not None:
            self.soc_primary.append(primary)
        if secondary is not None:
            self.soc_secondary.append(secondary)

    def binary_ids(self) -> list[int]:
        return [v.id for v in self.variables if v.kind is VarKind.BINARY]

    def primary_cones(self) -> list[SocConstraintPrimary]:
        """Primary rows, derived from the secondary rows if only those exist."""
        from mg1socp.conic import secondary_to_primary

        if self.soc_primary:
            return list(self.soc_primary)
        return [secondary_to_primary(c) for c in self.soc_secondary]


@dataclass(frozen=True)
class ModelStats:
    continuous: int = 0
    binary: int = 0
    linear_rows: int = 0
    form1_rows: int = 0
    form2_rows: int = 0
    primary_soc_rows: int = 0

    def __add__(self, other: "ModelStats") -> "ModelStats":
        return ModelStats(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))

    def __sub__(self, other: "ModelStats") -> "ModelStats":
        return ModelStats(*(getattr(self, f.name) - getattr(other, f.name) for f in fields(self)))


def stats(m: ConicModel) -> ModelStats:
    n_bin = sum(1 for v in m.variables if v.kind is VarKind.BINARY)
    return ModelStats(
        continuous=len(m.variables) - n_bin,
        binary=n_bin,
        linear_rows=len(m.linear_eqs) + len(m.linear_ineqs),
        form1_rows=sum(1 for c in m.soc_secondary if c.form is SocForm.FORM_I),
        form2_rows=sum(1 for c in m.soc_secondary if c.form is SocForm.FORM_II),
        primary_soc_rows=len(m.soc_primary),
    )


def _exprs(m: ConicModel):
    yield "objective", m.objective
    for i, e in enumerate(m.linear_eqs):
        yield f"linear_eqs[{i}]", e
    for i, e in enumerate(m.linear_ineqs):
        yield f"linear_ineqs[{i}]", e
    for i, c in enumerate(m.soc_primary):
        for r in c.norm_rows:
            yield f"soc_primary[{i}]", r
        yield f"soc_primary[{i}]", c.rhs
    for i, c in enumerate(m.soc_secondary):
        for r in c.quad_rows:
            yield f"soc_secondary[{i}]", r
        yield f"soc_secondary[{i}]", c.y
        if c.z is not None:
            yield f"soc_secondary[{i}]", c.z


def validate(m: ConicModel) -> list[str]:
    """Structural defects of ``m``; empty when the model is well formed."""
    defects = []
    for pos, v in enumerate(m.variables):
        if v.id != pos:
            defects.append(f"variable {v.name!r} has id {v.id}, expected dense id {pos}")
    n = len(m.variables)
    for where, e in _exprs(m):
        bad = [k for k in e.variables() if not 0 <= k < n]
        if bad:
            defects.append(f"{where} references undeclared variable(s) {bad}")
        if not all(math.isfinite(c) for c in e.coefficients.values()) or not math.isfinite(e.constant):
            defects.append(f"{where} has non-finite coefficients")
    if m.soc_primary and m.soc_secondary and len(m.soc_primary) != len(m.soc_secondary):
        defects.append("soc_primary and soc_secondary are populated with different row counts")
    lower = [v.lower for v in m.variables]
    for i, c in enumerate(m.soc_secondary):
        bounds = [c.y] if c.z is None else [c.y, c.z]
        for b in bounds:
            if any(not 0 <= k < n for k in b.variables()):
                continue
            if not is_nonneg_combination(b, lower):
                defects.append(f"soc_secondary[{i}]: secondary-form bound variable not provably nonnegative")
    return defects


def _norm_scale(rows) -> float:
    s = max((r.max_abs_coef() for r in rows), default=0.0)
    return s if s > 0 else 1.0


def eval_feasible(m: ConicModel, point: Mapping[int, float], tol: float = FEAS_TOL,
                  int_tol: float = INT_TOL) -> tuple[bool, list[str]]:
    """Check bounds, integrality, linear rows and conic rows at ``point``.

    Row residuals are measured after scaling each row to unit max-abs
    coefficient, the same normalization the solver applies.
    """
    missing = [v.id for v in m.variables if v.id not in point]
    if missing:
        raise MissingAssignmentError(f"point does not assign variables {missing[:10]}")
    bad = []
    for v in m.variables:
        val = point[v.id]
        if not math.isfinite(val):
            bad.append(f"nonfinite:{v.name}")
            continue
        if val < v.lower - tol or val > v.upper + tol:
            bad.append(f"bounds:{v.name}")
        if v.kind is VarKind.BINARY and min(abs(val), abs(val - 1.0)) > int_tol:
            bad.append(f"integrality:{v.name}")
    for i, e in enumerate(m.linear_eqs):
        if abs(e.evaluate(point)) / _norm_scale([e]) > tol:
            bad.append(f"linear_eqs[{i}]")
    for i, e in enumerate(m.linear_ineqs):
        if e.evaluate(point) / _norm_scale([e]) > tol:
            bad.append(f"linear_ineqs[{i}]")
    for i, c in enumerate(m.soc_primary):
        if soc_residual(c, point) / _norm_scale(list(c.norm_rows) + [c.rhs]) > tol:
            bad.append(f"soc_primary[{i}]")
    for i, c in enumerate(m.soc_secondary):
        rows = list(c.quad_rows) + [c.y] + ([c.z] if c.z is not None else [])
        if secondary_residual(c, point) / _norm_scale(rows) > tol:
            bad.append(f"soc_secondary[{i}]")
    return not bad, bad


def concatenate(a: ConicModel, b: ConicModel) -> ConicModel:
    """Disjoint union of two models; ``b``'s variable ids are shifted."""
    off = len(a.variables)

    def sh(e: LinExpr) -> LinExpr:
        return LinExpr({k + off: v for k, v in e.coefficients.items()}, e.constant)

    out = ConicModel(
        variables=list(a.variables) + [Variable(v.id + off, v.name, v.kind, v.lower, v.upper) for v in b.variables],
        objective=a.objective + sh(b.objective),
        linear_eqs=list(a.linear_eqs) + [sh(e) for e in b.linear_eqs],
        linear_ineqs=list(a.linear_ineqs) + [sh(e) for e in b.linear_ineqs],
        soc_primary=list(a.soc_primary) + [
            SocConstraintPrimary(tuple(sh(r) for r in c.norm_rows), sh(c.rhs)) for c in b.soc_primary],
        soc_secondary=list(a.soc_secondary) + [
            SocConstraintSecondary(c.form, tuple(sh(r) for r in c.quad_rows), sh(c.y),
                                   None if c.z is None else sh(c.z)) for c in b.soc_secondary],
        metadata={**a.metadata, **b.metadata},
    )
    return out
