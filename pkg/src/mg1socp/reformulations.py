"""The four MISOCP reformulations of the congested location model.

Every formulation shares the assignment rows (one server per customer,
serve only open stations, at most one level per facility, load within
capacity) and replaces the congestion term with auxiliary variables tied
to the station load ``Lam_ik = sum_j lam_j y_ikj`` by a hyperbolic
constraint:

====  ===========================================  ===============================  ======================
id    hyperbolic row                               secondary row (form I)           extra linear rows
====  ===========================================  ===============================  ======================
M1    Lam^2 <= r (mu - Lam)                        2 Lam^2 + r^2 + t^2 <= (r+t)^2   t = mu - Lam
M2    sum_j lam_j y_j^2 <= s (mu - Lam)            2 sum lam y^2 + s^2 + t^2 <= ..  t = mu - Lam
M3    Lam^2 <= (s mu - Lam)(mu - Lam)              4 Lam^2 + p^2 <= q^2             p, q definitions
M4    Lam^2 <= (s mu - Lam)(mu - Lam)              2 Lam^2 + t^2 + v^2 <= (t+v)^2   t = mu - Lam, v = s mu - Lam
====  ===========================================  ===============================  ======================

At the tightest auxiliary values ``r = Lam^2/(mu - Lam)`` and
``s = Lam/(mu - Lam)`` each objective equals the direct cost.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from mg1socp.conic import (
    HyperbolicConstraint,
    LinExpr,
    SocConstraintSecondary,
    SocForm,
    form2_to_form1,
    hyperbolic_to_soc,
)
from mg1socp.errors import InfeasibleAssignmentError, NonIntegralPointError
from mg1socp.location import Assignment, LocationInstance, check_feasible, evaluate
from mg1socp.model import INT_TOL, ConicModel, ModelStats, VarKind, stats


class Formulation(str, Enum):
    M1 = "M1"
    M2 = "M2"
    M3 = "M3"
    M4 = "M4"

    @classmethod
    def parse(cls, value) -> "Formulation":
        if isinstance(value, cls):
            return value
        text = str(value).strip().upper()
        if text.isdigit():
            text = "M" + text
        return cls(text)


AUX_FAMILIES = {
    Formulation.M1: ("r", "t"),
    Formulation.M2: ("s", "t"),
    Formulation.M3: ("s", "p", "q"),
    Formulation.M4: ("s", "t", "v"),
}


@dataclass
class BuildReceipt:
    model: ConicModel
    formulation: Formulation
    instance: LocationInstance
    x: np.ndarray                   # (I, K) variable ids
    y: np.ndarray                   # (I, K, J) variable ids
    aux: dict[str, np.ndarray]      # family -> (I, K) variable ids
    hyperbolic: list[HyperbolicConstraint] = field(default_factory=list)

    @property
    def var_map(self) -> dict[str, np.ndarray]:
        return {"x": self.x, "y": self.y, **self.aux}

    def load_expr(self, i: int, k: int) -> LinExpr:
        lam = self.instance.lam
        return LinExpr.total((int(self.y[i, k, j]), float(lam[j])) for j in range(lam.shape[0]))


def _base(inst: LocationInstance, name: str, relax_assignments: bool = False) -> tuple[ConicModel, np.ndarray, np.ndarray, list[list[LinExpr]]]:
    n_i, n_k, n_j = inst.shape
    m = ConicModel(metadata={"formulation": name, "shape": f"I={n_i},K={n_k},J={n_j}"})
    x = np.empty((n_i, n_k), dtype=np.int64)
    y = np.empty((n_i, n_k, n_j), dtype=np.int64)
    for i in range(n_i):
        for k in range(n_k):
            x[i, k] = m.add_binary(f"x[{i}][{k}]")
    for i in range(n_i):
        for k in range(n_k):
            for j in range(n_j):
                y[i, k, j] = (m.add_variable(f"y[{i}][{k}][{j}]", VarKind.CONTINUOUS, 0.0, 1.0)
                              if relax_assignments else m.add_binary(f"y[{i}][{k}][{j}]"))
    loads = [[LinExpr.total((int(y[i, k, j]), float(inst.lam[j])) for j in range(n_j)) for k in range(n_k)]
             for i in range(n_i)]
    for j in range(n_j):
        m.add_eq(LinExpr({int(y[i, k, j]): 1.0 for i in range(n_i) for k in range(n_k)}, -1.0))
    for i in range(n_i):
        for k in range(n_k):
            for j in range(n_j):
                m.add_ineq(LinExpr({int(y[i, k, j]): 1.0, int(x[i, k]): -1.0}))
    for i in range(n_i):
        if n_k:
            m.add_ineq(LinExpr({int(x[i, k]): 1.0 for k in range(n_k)}, -1.0))
    for i in range(n_i):
        for k in range(n_k):
            m.add_ineq(loads[i][k] - float(inst.mu[i, k]))
    return m, x, y, loads


def base_model(inst: LocationInstance) -> ConicModel:
    """Only the shared assignment rows, with the plain linear objective part."""
    return _base(inst, "base")[0]


def build(inst: LocationInstance, which: Formulation | str, relax_assignments: bool = False) -> BuildReceipt:
    """Build formulation ``which``.

    ``relax_assignments`` makes the customer assignments continuous in
    ``[0, 1]`` (split demand). M2 squares the assignment variables and is
    only valid for 0/1 values, so it rejects the option.
    """
    which = Formulation.parse(which)
    if relax_assignments and which is Formulation.M2:
        raise ValueError("M2 needs binary assignment variables; it cannot relax them")
    inst.validate()
    n_i, n_k, n_j = inst.shape
    m, x, y, loads = _base(inst, which.value, relax_assignments)
    if relax_assignments:
        m.metadata["assignments"] = "relaxed"

    aux = {}
    for fam in AUX_FAMILIES[which]:
        ids = np.empty((n_i, n_k), dtype=np.int64)
        lower = -math.inf if fam == "p" else 0.0
        for i in range(n_i):
            for k in range(n_k):
                ids[i, k] = m.add_variable(f"{fam}[{i}][{k}]", VarKind.CONTINUOUS, lower, math.inf)
        aux[fam] = ids

    obj = []
    hyper = []
    lam = inst.lam
    for i in range(n_i):
        wi = float(inst.w[i])
        for k in range(n_k):
            mu = float(inst.mu[i, k])
            c2 = mu * mu * float(inst.sigma[i, k]) ** 2
            load = loads[i][k]
            obj.append((int(x[i, k]), float(inst.f[i, k])))
            if which is Formulation.M1:
                r, t = int(aux["r"][i, k]), int(aux["t"][i, k])
                obj.append((r, wi * (1.0 + c2) / (2.0 * mu)))
                for j in range(n_j):
                    obj.append((int(y[i, k, j]), wi * float(lam[j]) / mu))
                m.add_eq(LinExpr.var(t) + load - mu)
                h = HyperbolicConstraint((load,), LinExpr.var(r), mu - load)
                sec = form2_to_form1(SocConstraintSecondary(SocForm.FORM_II, (load,), LinExpr.var(r), LinExpr.var(t)))
            else:
                s = int(aux["s"][i, k])
                obj.append((s, wi * (1.0 + c2) / 2.0))
                for j in range(n_j):
                    obj.append((int(y[i, k, j]), wi * (1.0 - c2) * float(lam[j]) / (2.0 * mu)))
                busy = mu * LinExpr.var(s) - load       # s mu - Lam
                idle = mu - load                        # mu - Lam
                if which is Formulation.M2:
                    t = int(aux["t"][i, k])
                    m.add_eq(LinExpr.var(t) + load - mu)
                    rows = tuple(LinExpr.var(int(y[i, k, j]), math.sqrt(float(lam[j]))) for j in range(n_j))
                    h = HyperbolicConstraint(rows, LinExpr.var(s), idle)
                    sec = form2_to_form1(SocConstraintSecondary(SocForm.FORM_II, rows, LinExpr.var(s), LinExpr.var(t)))
                elif which is Formulation.M3:
                    p, q = int(aux["p"][i, k]), int(aux["q"][i, k])
                    m.add_eq(LinExpr.var(p) - (busy - idle))
                    m.add_eq(LinExpr.var(q) - (busy + idle))
                    h = HyperbolicConstraint((load,), busy, idle)
                    sec = SocConstraintSecondary(SocForm.FORM_I, (2.0 * load, LinExpr.var(p)), LinExpr.var(q))
                else:
                    t, v = int(aux["t"][i, k]), int(aux["v"][i, k])
                    m.add_eq(LinExpr.var(t) + load - mu)
                    m.add_eq(LinExpr.var(v) - busy)
                    h = HyperbolicConstraint((load,), busy, idle)
                    sec = form2_to_form1(SocConstraintSecondary(SocForm.FORM_II, (load,), LinExpr.var(t), LinExpr.var(v)))
            for j in range(n_j):
                obj.append((int(y[i, k, j]), float(inst.d[i, j]) * float(lam[j])))
            hyper.append(h)
            m.add_cone(hyperbolic_to_soc(h), sec)
    m.objective = LinExpr.total(obj)
    return BuildReceipt(m, which, inst, x, y, aux, hyper)


def tight_aux(receipt: BuildReceipt, a: Assignment) -> dict[str, np.ndarray]:
    """Smallest feasible auxiliary values for the 0/1 assignment ``a``."""
    inst = receipt.instance
    load = a.loads(inst)
    mu = inst.mu
    if np.any(load >= mu):
        raise InfeasibleAssignmentError(["(12) a station load reaches its service rate"])
    s = load / (mu - load)
    vals = {
        "r": load * load / (mu - load),
        "s": s,
        "t": mu - load,
        "v": s * mu - load,
        "p": (s * mu - load) - (mu - load),
        "q": (s * mu - load) + (mu - load),
    }
    return {fam: vals[fam] for fam in receipt.aux}


def tight_point(receipt: BuildReceipt, a: Assignment) -> dict[int, float]:
    point = {}
    for (i, k), vid in np.ndenumerate(receipt.x):
        point[int(vid)] = float(a.x[i, k])
    for (i, k, j), vid in np.ndenumerate(receipt.y):
        point[int(vid)] = float(a.y[i, k, j])
    for fam, vals in tight_aux(receipt, a).items():
        for (i, k), vid in np.ndenumerate(receipt.aux[fam]):
            point[int(vid)] = float(vals[i, k])
    return point


@dataclass
class Extraction:
    assignment: Assignment
    aux: dict[str, np.ndarray]
    tightness: dict[str, np.ndarray]    # aux value minus its tight value

    def max_gap(self, weights: np.ndarray | None = None) -> float:
        """Largest tightness gap, optionally only where ``weights`` is positive."""
        worst = 0.0
        for gaps in self.tightness.values():
            g = np.abs(gaps)
            if weights is not None:
                g = g[weights > 0]
            if g.size:
                worst = max(worst, float(g.max()))
        return worst


def extract(receipt: BuildReceipt, point, int_tol: float = INT_TOL) -> Extraction:
    """Round the binaries of a solver point and report auxiliary tightness."""
    def val(vid):
        return float(point[int(vid)])

    xv = np.vectorize(val, otypes=[float])(receipt.x) if receipt.x.size else np.zeros(receipt.x.shape)
    yv = np.vectorize(val, otypes=[float])(receipt.y) if receipt.y.size else np.zeros(receipt.y.shape)
    for arr, fam in ((xv, "x"), (yv, "y")):
        frac = np.minimum(np.abs(arr), np.abs(arr - 1.0))
        if frac.size and frac.max() > int_tol:
            raise NonIntegralPointError(f"{fam} has a fractional entry ({frac.max():.3g} from integral)")
    a = Assignment(np.rint(xv).astype(np.int8), np.rint(yv).astype(np.int8))
    aux = {fam: (np.vectorize(val, otypes=[float])(ids) if ids.size else np.zeros(ids.shape))
           for fam, ids in receipt.aux.items()}
    load = a.loads(receipt.instance)
    mu = receipt.instance.mu
    with np.errstate(divide="ignore", invalid="ignore"):
        slack = np.where(load < mu, mu - load, np.nan)
        s_tight = load / slack
        tight = {"r": load * load / slack, "s": s_tight, "t": mu - load,
                 "v": s_tight * mu - load, "p": (s_tight * mu - load) - (mu - load),
                 "q": (s_tight * mu - load) + (mu - load)}
    tightness = {fam: np.nan_to_num(aux[fam] - tight[fam], nan=math.inf) for fam in aux}
    return Extraction(a, aux, tightness)


def rounding_heuristic(receipt: BuildReceipt):
    """Callback for ``solver.solve``: LP point in, full model point (tight
    auxiliaries) out, or ``None`` when rounding finds nothing feasible."""
    from mg1socp.heuristics import from_fractional

    inst = receipt.instance

    def run(point: np.ndarray):
        xv = np.asarray(point)[receipt.x].clip(0.0, 1.0)
        yv = np.asarray(point)[receipt.y].clip(0.0, 1.0)
        a = from_fractional(inst, xv, yv)
        if a is None:
            return None
        tp = tight_point(receipt, a)
        return np.array([tp[i] for i in range(len(receipt.model.variables))])

    return run


def branching_priorities(receipt: BuildReceipt) -> dict[int, int]:
    """Open/level decisions before customer assignments."""
    return {int(v): 1 for v in receipt.x.ravel()}


def reformulated_objective(receipt: BuildReceipt, a: Assignment) -> float:
    return float(receipt.model.objective.evaluate(tight_point(receipt, a)))


def objective_identity_check(receipt: BuildReceipt, a: Assignment) -> tuple[float, float]:
    """``(objective of the formulation at tight auxiliaries, direct cost)``."""
    ok, bad = check_feasible(receipt.instance, a)
    if not ok:
        raise InfeasibleAssignmentError(bad)
    return reformulated_objective(receipt, a), evaluate(receipt.instance, a)


@dataclass(frozen=True)
class StructureRow:
    formulation: Formulation
    additional_reals: int
    additional_constraints: int
    form1_rows: int
    form2_rows: int


def structural_compare(inst: LocationInstance) -> dict[Formulation, StructureRow]:
    """Counts of the variables and rows each formulation adds to the base model."""
    base = stats(base_model(inst))
    out = {}
    for f in Formulation:
        diff: ModelStats = stats(build(inst, f).model) - base
        out[f] = StructureRow(f, diff.continuous, diff.linear_rows, diff.form1_rows, diff.form2_rows)
    return out
