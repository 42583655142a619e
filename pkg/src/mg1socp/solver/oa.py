"""Outer approximation of the conic rows by gradient cuts.

Every linear row and every cone is scaled to unit max-abs coefficient before
it reaches the LP, and cone violations are measured in those scaled units.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from mg1socp.conic import LinExpr, SocConstraintPrimary, secondary_to_primary
from mg1socp.model import ConicModel, VarKind
from mg1socp.solver.lp import LpCore, LpOutcome, LpStatus, _rows_to_csr

ROOT_TOL = 1e-8
ROOT_ROUND_CAP = 100_000
# a cut must cut the point off by more than the LP's own feasibility slack
MIN_CUT_DEPTH = 1e-8
DENSE_CUT_LIMIT = 4_000_000


def _scaled(exprs: list[LinExpr]) -> tuple[list[LinExpr], np.ndarray]:
    scales = np.array([e.max_abs_coef() or 1.0 for e in exprs])
    return [e * (1.0 / s) for e, s in zip(exprs, scales)], scales


class CompiledModel:
    """Array form of a ``ConicModel`` for repeated LP/OA work."""

    def __init__(self, m: ConicModel, cone_source: str = "primary", extra_ineqs=()):
        n = len(m.variables)
        self.n = n
        self.model = m
        self.c = np.zeros(n)
        for k, v in m.objective.coefficients.items():
            self.c[k] = v
        self.c0 = m.objective.constant
        self.lb = np.array([v.lower for v in m.variables], dtype=np.float64)
        self.ub = np.array([v.upper for v in m.variables], dtype=np.float64)
        self.binaries = np.array([v.id for v in m.variables if v.kind is VarKind.BINARY], dtype=np.int64)

        self.trivially_infeasible = False
        rows, lo, hi = [], [], []
        for e in m.linear_eqs:
            if not e.coefficients:
                self.trivially_infeasible |= abs(e.constant) > 1e-9
                continue
            rows.append(e)
            lo.append(-e.constant)
            hi.append(-e.constant)
        for e in list(m.linear_ineqs) + list(extra_ineqs):
            if not e.coefficients:
                self.trivially_infeasible |= e.constant > 1e-9
                continue
            rows.append(e)
            lo.append(-math.inf)
            hi.append(-e.constant)
        scaled, s = _scaled(rows)
        self.A = _rows_to_csr(scaled, n)
        self.row_lo = np.array(lo, dtype=np.float64) / s if rows else np.zeros(0)
        self.row_hi = np.array(hi, dtype=np.float64) / s if rows else np.zeros(0)

        if cone_source == "primary":
            cones = m.primary_cones()
        elif cone_source == "secondary":
            cones = [secondary_to_primary(c) for c in m.soc_secondary] or list(m.soc_primary)
        else:
            raise ValueError(f"unknown cone source {cone_source!r}")
        self.cones: list[SocConstraintPrimary] = cones
        g_rows, g_const, h_rows, h_const, ptr = [], [], [], [], [0]
        for cone in cones:
            scale = max([r.max_abs_coef() for r in cone.norm_rows] + [cone.rhs.max_abs_coef()]) or 1.0
            for r in cone.norm_rows:
                g_rows.append(r * (1.0 / scale))
                g_const.append(r.constant / scale)
            h_rows.append(cone.rhs * (1.0 / scale))
            h_const.append(cone.rhs.constant / scale)
            ptr.append(ptr[-1] + len(cone.norm_rows))
        self.G = _rows_to_csr(g_rows, n)
        self.g = np.array(g_const, dtype=np.float64)
        self.H = _rows_to_csr(h_rows, n)
        self.h = np.array(h_const, dtype=np.float64)
        self.ptr = np.array(ptr, dtype=np.int64)
        self.n_cones = len(cones)
        # dense copies make per-round cut generation cheap on small models
        dense = self.G.shape[0] * n <= DENSE_CUT_LIMIT
        self._Gd = self.G.toarray() if dense else None
        self._Hd = self.H.toarray() if dense else None

    def violations(self, x: np.ndarray) -> np.ndarray:
        """Scaled residual ``||G x + g|| - (H x + h)`` per cone."""
        if not self.n_cones:
            return np.zeros(0)
        u = self.G @ x + self.g
        norms = np.sqrt(np.add.reduceat(u * u, self.ptr[:-1]))
        return norms - (self.H @ x + self.h)

    def gradient_cuts(self, x: np.ndarray, which: np.ndarray) -> tuple[sp.csr_matrix, np.ndarray]:
        """Cuts ``a x <= b`` at ``x`` for the cones listed in ``which``.

        For ``u = G_k x + g_k`` the cut is ``(u/|u|)' (G_k x + g_k) <= H_k x + h_k``;
        at ``u = 0`` it degenerates to ``0 <= H_k x + h_k``.
        """
        which = np.asarray(which, dtype=np.int64)
        if not which.size:
            return sp.csr_matrix((0, self.n)), np.zeros(0)
        u = self.G @ x + self.g
        starts, ends = self.ptr[which], self.ptr[which + 1]
        lens = ends - starts
        gidx = np.concatenate([np.arange(a, b) for a, b in zip(starts, ends)])
        owner = np.repeat(np.arange(which.size), lens)
        uu = u[gidx]
        nu = np.sqrt(np.bincount(owner, uu * uu, minlength=which.size))
        safe = np.where(nu > 0, nu, 1.0)
        dirn = np.where(nu[owner] > 0, uu / safe[owner], 0.0)
        if self._Gd is not None:
            A = np.zeros((which.size, self.n))
            np.add.at(A, owner, dirn[:, None] * self._Gd[gidx])
            A -= self._Hd[which]
            b = self.h[which] - np.bincount(owner, dirn * self.g[gidx], minlength=which.size)
            scale = np.abs(A).max(axis=1)
        else:
            D = sp.csr_matrix((dirn, (owner, gidx)), shape=(which.size, self.G.shape[0]))
            A = (D @ self.G - self.H[which]).tocsr()
            b = self.h[which] - D @ self.g
            scale = np.asarray(abs(A).max(axis=1).todense()).ravel()
        depth = (A @ x - b) / np.where(scale > 0, scale, 1.0)
        keep = np.flatnonzero((scale > 0) & (depth > MIN_CUT_DEPTH))
        if not keep.size:
            return sp.csr_matrix((0, self.n)), np.zeros(0)
        if self._Gd is not None:
            return sp.csr_matrix(A[keep] / scale[keep, None]), b[keep] / scale[keep]
        inv = sp.diags(1.0 / scale[keep])
        return (inv @ A[keep]).tocsr(), b[keep] / scale[keep]

    def initial_cuts(self) -> tuple[sp.csr_matrix, np.ndarray]:
        """``+-(each norm component) <= rhs`` for every cone."""
        rows, rhs = [], []
        for k in range(self.n_cones):
            Hk = self.H[k].toarray().ravel()
            for r in range(self.ptr[k], self.ptr[k + 1]):
                Gr = self.G[r].toarray().ravel()
                for sign in (1.0, -1.0):
                    a = sign * Gr - Hk
                    s = np.abs(a).max()
                    if s == 0.0:
                        continue
                    rows.append(a / s)
                    rhs.append((self.h[k] - sign * self.g[r]) / s)
        if not rows:
            return sp.csr_matrix((0, self.n)), np.zeros(0)
        return sp.csr_matrix(np.vstack(rows)), np.array(rhs)

    def new_core(self, seed: int = 0, primal_tol: float = 1e-9) -> LpCore:
        return LpCore(self.c, self.lb, self.ub, self.A, self.row_lo, self.row_hi,
                      offset=self.c0, primal_tol=primal_tol, dual_tol=primal_tol, seed=seed)

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x) + self.c0


@dataclass
class CutPool:
    """Grow-only store of globally valid cuts ``a x <= b``."""

    n: int
    blocks: list[tuple[sp.csr_matrix, np.ndarray]] = field(default_factory=list)
    size: int = 0

    def add(self, A: sp.csr_matrix, b: np.ndarray) -> None:
        if A.shape[0]:
            self.blocks.append((A, b))
            self.size += A.shape[0]


class PooledCore:
    """An LP core that stays in sync with a shared cut pool."""

    def __init__(self, cm: CompiledModel, pool: CutPool, seed: int = 0, primal_tol: float = 1e-9):
        self.cm = cm
        self.pool = pool
        self.core = cm.new_core(seed=seed, primal_tol=primal_tol)
        self._synced = 0
        self.sync()
        # model rows and whatever the pool held at creation (the root bound cuts) stay put
        self.protected = self.core.n_rows

    def purge(self, max_cuts: int, slack_tol: float = 1e-7) -> int:
        """Drop non-binding cut rows from this LP once there are more than
        ``max_cuts``. The pool keeps them; only this core forgets."""
        extra = self.core.n_rows - self.protected
        if extra <= max_cuts:
            return 0
        slack = self.core.row_slack()[self.protected:]
        drop = np.flatnonzero(slack > slack_tol) + self.protected
        self.core.delete_rows(drop)
        return drop.size

    def sync(self) -> None:
        for A, b in self.pool.blocks[self._synced:]:
            self.core.add_rows(A, np.full(A.shape[0], -math.inf), b)
        self._synced = len(self.pool.blocks)

    def add_cuts(self, A: sp.csr_matrix, b: np.ndarray) -> None:
        self.sync()
        self.pool.add(A, b)
        self.sync()


@dataclass
class OaResult:
    outcome: LpOutcome
    rounds: int = 0
    cuts_added: int = 0
    max_violation: float = math.inf
    converged: bool = False
    cutoff_hit: bool = False
    history: list[float] = field(default_factory=list)


def run_oa(pc: PooledCore, tol: float, max_rounds: int | None, cutoff: float = math.inf,
           keep_going=None, tail_rounds: int = 0, tail_tol: float = 0.0) -> OaResult:
    """Solve the LP, add gradient cuts for every violated cone, repeat.

    Stops when the largest scaled violation is at most ``tol``, when the LP
    value reaches ``cutoff``, or after ``max_rounds`` cut rounds unless
    ``keep_going(x)`` asks to continue. With ``tail_rounds > 0`` it also
    stops once the value has risen by less than ``tail_tol`` (relative) over
    that many rounds, again unless ``keep_going(x)``.
    """
    cm = pc.cm
    pc.sync()
    res = OaResult(LpOutcome(LpStatus.INFEASIBLE))
    rounds = 0
    while True:
        out = pc.core.solve()
        res.outcome = out
        if out.status is not LpStatus.OPTIMAL:
            return res
        res.history.append(out.objective_value)
        viol = cm.violations(out.x)
        res.max_violation = float(viol.max()) if viol.size else 0.0
        if res.max_violation <= tol:
            res.converged = True
            return res
        if out.objective_value >= cutoff:
            res.cutoff_hit = True
            return res
        cap = max_rounds if max_rounds is not None else ROOT_ROUND_CAP
        stalled = (tail_rounds > 0 and len(res.history) > tail_rounds
                   and res.history[-1] - res.history[-1 - tail_rounds]
                   <= tail_tol * max(1.0, abs(res.history[-1])))
        if (rounds >= cap or stalled) and not (keep_going is not None and keep_going(out.x)
                                               and rounds < ROOT_ROUND_CAP):
            return res
        A, b = cm.gradient_cuts(out.x, np.flatnonzero(viol > tol))
        if A.shape[0] == 0:
            return res
        pc.add_cuts(A, b)
        res.cuts_added += A.shape[0]
        rounds += 1
        res.rounds = rounds


def _extra_cut_block(extra_cuts, n: int):
    exprs = [e for e in extra_cuts if e.coefficients]
    if not exprs:
        return None
    scaled, s = _scaled(exprs)
    return _rows_to_csr(scaled, n), -np.array([e.constant for e in exprs]) / s


@dataclass
class RelaxationResult:
    outcome: LpOutcome
    cuts: int
    rounds: int
    max_violation: float
    converged: bool
    history: list[float]


def solve_relaxation(m: ConicModel, extra_cuts=(), config=None, tol: float | None = None,
                     max_rounds: int | None = -1) -> RelaxationResult:
    """Continuous relaxation of ``m`` under a gradient-cut outer approximation.

    Integrality is dropped. ``extra_cuts`` are valid rows ``expr <= 0`` added
    up front. The returned LP value is a lower bound on the continuous conic
    optimum.
    """
    from mg1socp.solver.bnb import SolverConfig

    from mg1socp.solver.bnb import _check

    config = config or SolverConfig()
    _check(m)
    tol = config.oa_tol if tol is None else tol
    if max_rounds == -1:
        max_rounds = config.max_oa_rounds
    cm = CompiledModel(m, config.cone_source)
    pool = CutPool(cm.n)
    pool.add(*cm.initial_cuts())
    extra = _extra_cut_block(extra_cuts, cm.n)
    if extra is not None:
        pool.add(*extra)
    pc = PooledCore(cm, pool, seed=config.seed)
    if cm.trivially_infeasible:
        return RelaxationResult(LpOutcome(LpStatus.INFEASIBLE), 0, 0, math.inf, False, [])
    res = run_oa(pc, tol, max_rounds)
    return RelaxationResult(res.outcome, res.cuts_added, res.rounds, res.max_violation, res.converged, res.history)
