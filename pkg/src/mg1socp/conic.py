"""Affine expressions and second-order cone constraint forms.

A *primary* SOC row is ``||E x - e|| <= beta^T x - delta``. The *secondary*
forms are the quadratic rows accepted by MISOCP solvers:

* form I:  ``||q(x)||^2 <= y^2`` with ``y >= 0``
* form II: ``||q(x)||^2 <= y * z`` with ``y, z >= 0``

The quadratic part is always carried as a list of affine rows whose squared
norm is ``x^T Q x``, so ``Q`` is positive semidefinite by construction.
Evaluation functions accept scalars or numpy arrays as variable values, so a
whole batch of points can be checked in one call.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from numbers import Real
from typing import Mapping, Sequence

import numpy as np

from mg1socp.errors import MissingAssignmentError

FEAS_TOL = 1e-7
_SQRT2 = math.sqrt(2.0)


class LinExpr:
    """Sparse affine expression ``sum(coef * var) + constant``.

    Variable ids are ints. Exact zero coefficients are dropped so that
    symbolically cancelled terms vanish from the coefficient map.
    """

    __slots__ = ("coefficients", "constant")

    def __init__(self, coefficients: Mapping[int, float] | None = None, constant: float = 0.0):
        self.coefficients: dict[int, float] = {}
        if coefficients:
            for k, v in coefficients.items():
                v = float(v)
                if not math.isfinite(v):
                    raise ValueError(f"non-finite coefficient for variable {k}")
                if v != 0.0:
                    self.coefficients[int(k)] = v
        self.constant = float(constant)

    @classmethod
    def var(cls, vid: int, coef: float = 1.0) -> "LinExpr":
        return cls({vid: coef})

    @classmethod
    def const(cls, value: float) -> "LinExpr":
        return cls(None, value)

    @classmethod
    def total(cls, terms) -> "LinExpr":
        """Sum an iterable of ``(vid, coef)`` pairs into one expression."""
        out = cls()
        c = out.coefficients
        for vid, coef in terms:
            c[vid] = c.get(vid, 0.0) + coef
        for vid in [k for k, v in c.items() if v == 0.0]:
            del c[vid]
        return out

    def copy(self) -> "LinExpr":
        out = LinExpr()
        out.coefficients = dict(self.coefficients)
        out.constant = self.constant
        return out

    def variables(self):
        return self.coefficients.keys()

    def _combine(self, other, sign: float) -> "LinExpr":
        out = self.copy()
        if isinstance(other, LinExpr):
            c = out.coefficients
            for k, v in other.coefficients.items():
                nv = c.get(k, 0.0) + sign * v
                if nv == 0.0:
                    c.pop(k, None)
                else:
                    c[k] = nv
            out.constant += sign * other.constant
            return out
        if isinstance(other, Real):
            out.constant += sign * float(other)
            return out
        return NotImplemented

    def __add__(self, other):
        return self._combine(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __rsub__(self, other):
        res = self._combine(other, -1.0)
        return NotImplemented if res is NotImplemented else -res

    def __mul__(self, k):
        if not isinstance(k, Real):
            return NotImplemented
        k = float(k)
        if k == 0.0:
            return LinExpr()
        out = LinExpr()
        out.coefficients = {v: c * k for v, c in self.coefficients.items()}
        out.constant = self.constant * k
        return out

    __rmul__ = __mul__

    def __truediv__(self, k):
        return self * (1.0 / k)

    def __neg__(self):
        return self * -1.0

    def __eq__(self, other):
        if not isinstance(other, LinExpr):
            return NotImplemented
        return self.coefficients == other.coefficients and self.constant == other.constant

    def __hash__(self):
        return hash((frozenset(self.coefficients.items()), self.constant))

    def __repr__(self):
        terms = " + ".join(f"{c:g}*v{k}" for k, c in self.coefficients.items())
        return f"LinExpr({terms or '0'} + {self.constant:g})"

    def max_abs_coef(self) -> float:
        return max((abs(v) for v in self.coefficients.values()), default=0.0)

    def evaluate(self, point: Mapping[int, float]):
        total = self.constant
        try:
            for k, c in self.coefficients.items():
                total = total + c * point[k]
        except KeyError as exc:
            raise MissingAssignmentError(f"point does not assign variable {exc.args[0]}") from None
        return total


def _norm(values):
    return np.sqrt(sum(v * v for v in values))


@dataclass(frozen=True)
class SocConstraintPrimary:
    norm_rows: tuple[LinExpr, ...]
    rhs: LinExpr

    def __post_init__(self):
        object.__setattr__(self, "norm_rows", tuple(self.norm_rows))
        if not self.norm_rows:
            raise ValueError("a primary SOC row needs at least one norm row")

    def variables(self) -> set[int]:
        out = set(self.rhs.variables())
        for r in self.norm_rows:
            out.update(r.variables())
        return out


class SocForm(str, Enum):
    FORM_I = "FormI"
    FORM_II = "FormII"


@dataclass(frozen=True)
class SocConstraintSecondary:
    form: SocForm
    quad_rows: tuple[LinExpr, ...]
    y: LinExpr
    z: LinExpr | None = None

    def __post_init__(self):
        object.__setattr__(self, "form", SocForm(self.form))
        object.__setattr__(self, "quad_rows", tuple(self.quad_rows))
        if self.form is SocForm.FORM_I and self.z is not None:
            raise ValueError("form-I rows carry no z")
        if self.form is SocForm.FORM_II and self.z is None:
            raise ValueError("form-II rows need z")

    def variables(self) -> set[int]:
        out = set(self.y.variables())
        if self.z is not None:
            out.update(self.z.variables())
        for r in self.quad_rows:
            out.update(r.variables())
        return out


@dataclass(frozen=True)
class HyperbolicConstraint:
    """``||x||^2 <= y * z`` with ``y, z >= 0`` enforced elsewhere.

    ``x`` is a tuple of affine rows; a single row gives the scalar case
    ``x^2 <= y z``.
    """

    x: tuple[LinExpr, ...]
    y: LinExpr
    z: LinExpr

    def __post_init__(self):
        x = (self.x,) if isinstance(self.x, LinExpr) else tuple(self.x)
        object.__setattr__(self, "x", x)

    def holds(self, point, tol: float = 0.0):
        """Membership of ``||x||^2 <= y z`` (the sign conditions are not checked)."""
        lhs = sum(r.evaluate(point) ** 2 for r in self.x)
        return lhs <= self.y.evaluate(point) * self.z.evaluate(point) + tol


def hyperbolic_to_soc(h: HyperbolicConstraint) -> SocConstraintPrimary:
    """``||x||^2 <= y z`` as ``||(2x, y - z)|| <= y + z``."""
    rows = tuple(2.0 * r for r in h.x) + (h.y - h.z,)
    return SocConstraintPrimary(rows, h.y + h.z)


def form2_to_form1(c: SocConstraintSecondary) -> SocConstraintSecondary:
    """Rewrite ``q'q <= y z`` as ``2 q'q + y^2 + z^2 <= (y + z)^2``."""
    if c.form is not SocForm.FORM_II or c.z is None:
        raise ValueError("form2_to_form1 expects a form-II row")
    rows = tuple(_SQRT2 * r for r in c.quad_rows) + (c.y, c.z)
    return SocConstraintSecondary(SocForm.FORM_I, rows, c.y + c.z)


def secondary_to_primary(c: SocConstraintSecondary) -> SocConstraintPrimary:
    if c.form is SocForm.FORM_I:
        return SocConstraintPrimary(c.quad_rows, c.y)
    return hyperbolic_to_soc(HyperbolicConstraint(c.quad_rows, c.y, c.z))


def soc_residual(c: SocConstraintPrimary, point: Mapping[int, float]):
    """``||E x - e|| - (beta^T x - delta)``; nonpositive iff satisfied."""
    return _norm([r.evaluate(point) for r in c.norm_rows]) - c.rhs.evaluate(point)


def secondary_residual(c: SocConstraintSecondary, point: Mapping[int, float]):
    """Residual of a secondary row in norm units; nonpositive iff satisfied.

    Form I: ``||q|| - y``. Form II: residual of the equivalent
    ``||(2q, y - z)|| <= y + z``, which also enforces ``y, z >= 0``.
    """
    q = [r.evaluate(point) for r in c.quad_rows]
    y = c.y.evaluate(point)
    if c.form is SocForm.FORM_I:
        return _norm(q) - y
    z = c.z.evaluate(point)
    return _norm([2.0 * v for v in q] + [y - z]) - (y + z)


def gradient_cut(c: SocConstraintPrimary, point: Mapping[int, float], tol: float = 0.0) -> LinExpr | None:
    """Supporting-hyperplane cut ``u'(Ex - e)/||u|| - (beta'x - delta) <= 0``.

    ``u`` is the value of the norm rows at ``point``. Returns ``None`` when
    the point satisfies the row (residual <= ``tol``). At a point where the
    norm part vanishes the cut degenerates to ``-(beta'x - delta) <= 0``.
    """
    u = [float(r.evaluate(point)) for r in c.norm_rows]
    nu = math.sqrt(sum(v * v for v in u))
    if nu - float(c.rhs.evaluate(point)) <= tol:
        return None
    if nu == 0.0:
        return -c.rhs
    cut = -c.rhs
    for ui, r in zip(u, c.norm_rows):
        if ui != 0.0:
            cut = cut + (ui / nu) * r
    return cut


def is_nonneg_combination(expr: LinExpr, lower_bounds: Mapping[int, float] | Sequence[float]) -> bool:
    """Positive combination of provably nonnegative variables plus a nonnegative constant."""
    if expr.constant < 0:
        return False
    for vid, coef in expr.coefficients.items():
        if coef <= 0 or lower_bounds[vid] < 0:
            return False
    return True
