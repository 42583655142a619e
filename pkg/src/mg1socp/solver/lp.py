"""LP core on top of HiGHS.

``LpCore`` keeps one HiGHS model alive so that cut rows can be appended and
column bounds changed between solves while the simplex basis is reused.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import highspy
import numpy as np
import scipy.sparse as sp

from mg1socp.conic import LinExpr
from mg1socp.errors import LpNumericalError

INF = highspy.kHighsInf
_MAX_RETRIES = 2


class LpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass
class LpOutcome:
    status: LpStatus
    objective_value: float = math.nan
    x: np.ndarray | None = None

    @property
    def point(self) -> dict[int, float] | None:
        if self.x is None:
            return None
        return {i: float(v) for i, v in enumerate(self.x)}


@dataclass
class LpProblem:
    """``min objective`` s.t. ``expr <= 0`` / ``expr == 0`` rows and bounds."""

    n_vars: int
    objective: LinExpr = field(default_factory=LinExpr)
    rows: list[tuple[LinExpr, str]] = field(default_factory=list)   # sense "<=" or "=="
    lower: list[float] | None = None
    upper: list[float] | None = None


def _bound(v: float) -> float:
    if v == math.inf:
        return INF
    if v == -math.inf:
        return -INF
    return float(v)


class LpCore:
    def __init__(self, c, lb, ub, A=None, row_lo=None, row_hi=None, offset: float = 0.0,
                 primal_tol: float = 1e-9, dual_tol: float = 1e-9, seed: int = 0):
        self.n = len(c)
        self.offset = float(offset)
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("presolve", "off")
        h.setOptionValue("primal_feasibility_tolerance", primal_tol)
        h.setOptionValue("dual_feasibility_tolerance", dual_tol)
        h.setOptionValue("random_seed", int(seed))
        h.setOptionValue("threads", 1)
        h.setOptionValue("simplex_dual_edge_weight_strategy", 1)   # devex: cheaper iterations on re-solves
        self.h = h
        self._lb = np.array([_bound(v) for v in lb], dtype=np.float64)
        self._ub = np.array([_bound(v) for v in ub], dtype=np.float64)
        if self.n:
            h.addCols(self.n, np.asarray(c, dtype=np.float64), self._lb, self._ub,
                      0, np.zeros(self.n, dtype=np.int32), np.zeros(0, dtype=np.int32), np.zeros(0))
        self.n_rows = 0
        if A is not None and A.shape[0]:
            self.add_rows(A, row_lo, row_hi)

    def add_rows(self, A: sp.csr_matrix, lo, hi) -> None:
        A = sp.csr_matrix(A)
        m = A.shape[0]
        if m == 0:
            return
        lo = np.array([_bound(v) for v in lo], dtype=np.float64)
        hi = np.array([_bound(v) for v in hi], dtype=np.float64)
        self.h.addRows(m, lo, hi, A.nnz, A.indptr[:-1].astype(np.int32),
                       A.indices.astype(np.int32), A.data.astype(np.float64))
        self.n_rows += m

    def set_bounds(self, lb: np.ndarray, ub: np.ndarray) -> None:
        lb = np.where(np.isneginf(lb), -INF, lb)
        ub = np.where(np.isposinf(ub), INF, ub)
        idx = np.flatnonzero((lb != self._lb) | (ub != self._ub)).astype(np.int32)
        if idx.size:
            self.h.changeColsBounds(idx.size, idx, lb[idx].astype(np.float64), ub[idx].astype(np.float64))
            self._lb[idx] = lb[idx]
            self._ub[idx] = ub[idx]

    def delete_rows(self, idx: np.ndarray) -> None:
        idx = np.asarray(idx, dtype=np.int32)
        if idx.size:
            self.h.deleteRows(idx.size, idx)
            self.n_rows -= idx.size

    def row_slack(self) -> np.ndarray:
        """``upper - activity`` per row at the last solution."""
        act = np.asarray(self.h.getSolution().row_value, dtype=np.float64)
        hi = np.asarray(self.h.getLp().row_upper_, dtype=np.float64)
        return hi - act

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self._lb.copy(), self._ub.copy()

    def solve(self) -> LpOutcome:
        h = self.h
        if self.n == 0:
            return LpOutcome(LpStatus.OPTIMAL, self.offset, np.zeros(0))
        for attempt in range(_MAX_RETRIES + 1):
            h.run()
            st = h.getModelStatus()
            if st == highspy.HighsModelStatus.kOptimal:
                x = np.asarray(h.getSolution().col_value, dtype=np.float64)
                return LpOutcome(LpStatus.OPTIMAL, float(h.getInfo().objective_function_value) + self.offset, x)
            if st == highspy.HighsModelStatus.kInfeasible:
                return LpOutcome(LpStatus.INFEASIBLE)
            if st == highspy.HighsModelStatus.kUnbounded:
                return LpOutcome(LpStatus.UNBOUNDED)
            if st == highspy.HighsModelStatus.kUnboundedOrInfeasible:
                return self._disambiguate()
            # numerical trouble: drop the factorization and retry from scratch
            h.clearSolver()
        raise LpNumericalError(f"LP solve failed with status {h.modelStatusToString(st)}")

    def _disambiguate(self) -> LpOutcome:
        h = self.h
        n = self.n
        idx = np.arange(n, dtype=np.int32)
        cost = np.asarray(h.getLp().col_cost_, dtype=np.float64)
        h.changeColsCost(n, idx, np.zeros(n))
        h.clearSolver()
        h.run()
        feasible = h.getModelStatus() == highspy.HighsModelStatus.kOptimal
        h.changeColsCost(n, idx, cost)
        h.clearSolver()
        return LpOutcome(LpStatus.UNBOUNDED if feasible else LpStatus.INFEASIBLE)


def _rows_to_csr(exprs: list[LinExpr], n: int) -> sp.csr_matrix:
    indptr = [0]
    indices = []
    data = []
    for e in exprs:
        for k, v in e.coefficients.items():
            indices.append(k)
            data.append(v)
        indptr.append(len(indices))
    return sp.csr_matrix((np.array(data, dtype=np.float64), np.array(indices, dtype=np.int64),
                          np.array(indptr, dtype=np.int64)), shape=(len(exprs), n))


def solve_lp(p: LpProblem) -> LpOutcome:
    """Solve a one-off LP given in expression form."""
    n = p.n_vars
    c = np.zeros(n)
    for k, v in p.objective.coefficients.items():
        c[k] = v
    lb = p.lower if p.lower is not None else [-math.inf] * n
    ub = p.upper if p.upper is not None else [math.inf] * n
    exprs = [e for e, _ in p.rows]
    lo = [-e.constant if s == "==" else -math.inf for e, s in p.rows]
    hi = [-e.constant for e, _ in p.rows]
    for e, s in p.rows:
        if s not in ("<=", "=="):
            raise ValueError(f"unknown row sense {s!r}")
    core = LpCore(c, lb, ub, _rows_to_csr(exprs, n), lo, hi, offset=p.objective.constant)
    return core.solve()
