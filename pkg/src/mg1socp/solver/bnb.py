"""Best-bound branch-and-bound over the binaries of a ``ConicModel``.

Each node runs the outer-approximation loop on a private LP core. Cuts go to
one grow-only pool shared by every core, since a gradient cut of a convex
row is valid everywhere in the tree.
"""
from __future__ import annotations

import heapq
import json
import logging
import math
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from mg1socp.errors import InvalidModelError
from mg1socp.model import INT_TOL, ConicModel, eval_feasible, validate
from mg1socp.solver.lp import LpStatus
from mg1socp.solver.presolve import implied_bound_rows
from mg1socp.solver.oa import (
    ROOT_ROUND_CAP,
    ROOT_TOL,
    CompiledModel,
    CutPool,
    PooledCore,
    run_oa,
)

log = logging.getLogger("mg1socp.solver")

POLISH_TOL = 1e-8
ACCEPT_TOL = 1e-6


class Branching(str, Enum):
    MOST_FRACTIONAL = "MostFractional"
    PSEUDO_COST = "PseudoCost"


class NodeSelection(str, Enum):
    BEST_BOUND = "BestBound"
    DEPTH_FIRST = "DepthFirst"


class SolveStatus(str, Enum):
    OPTIMAL = "Optimal"
    GAP_LIMIT = "GapLimit"
    TIME_LIMIT = "TimeLimit"
    INFEASIBLE = "Infeasible"


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("MG1SOCP_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class SolverConfig:
    rel_gap: float = 1e-5
    abs_gap: float = 1e-9
    time_limit: float = math.inf          # seconds
    node_limit: int | None = None         # nodes after the root
    max_oa_rounds: int = 50
    branching: Branching = Branching.MOST_FRACTIONAL
    node_selection: NodeSelection = NodeSelection.BEST_BOUND
    threads: int = field(default_factory=_default_threads)
    seed: int = 0
    oa_tol: float = 1e-6
    log_every: int = 1000
    cone_source: str = "primary"
    tail_rounds: int = 3                  # OA tailing-off window at fractional nodes
    tail_tol: float = 1e-6
    max_active_cuts: int = 600            # per-LP cut rows kept before non-binding ones are dropped
    heuristic_every: int = 50             # nodes between primal-heuristic calls (0: root only)
    lift_implied_bounds: bool = True      # add lifted knapsack rows before the search

    def __post_init__(self):
        self.branching = Branching(self.branching)
        self.node_selection = NodeSelection(self.node_selection)
        if not (self.rel_gap > 0 and self.abs_gap > 0):
            raise ValueError("gap targets must be positive")
        if not self.oa_tol > 0:
            raise ValueError("oa_tol must be positive")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        if self.node_limit is not None and self.node_limit < 0:
            raise ValueError("node_limit must be nonnegative")


@dataclass
class SolveResult:
    status: SolveStatus
    incumbent: dict[int, float] | None
    primal: float
    dual_bound: float
    gap: float
    nodes: int
    cuts: int
    root_bound: float
    wall_time: float

    def to_dict(self) -> dict:
        def num(v):
            return v if math.isfinite(v) else None
        return {
            "status": self.status.value,
            "primal": num(self.primal),
            "dual_bound": num(self.dual_bound),
            "gap": num(self.gap),
            "nodes": self.nodes,
            "cuts": self.cuts,
            "root_bound": num(self.root_bound),
            "wall_time": self.wall_time,
            "incumbent": None if self.incumbent is None
            else [[k, v] for k, v in sorted(self.incumbent.items())],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def relative_gap(primal: float, dual: float) -> float:
    if not math.isfinite(primal):
        return math.inf
    if not math.isfinite(dual):
        return math.inf
    return max(0.0, primal - dual) / max(abs(primal), 1e-10)


@dataclass
class _Node:
    bound: float
    depth: int
    seq: int
    fix_lo: np.ndarray        # bounds of the binaries only
    fix_hi: np.ndarray
    branch: tuple | None = None   # (var position, direction, parent value, parent frac)


@dataclass
class _NodeOutcome:
    node: _Node
    status: str               # "infeasible", "cutoff", "integral", "branch"
    bound: float = math.inf
    x: np.ndarray | None = None
    candidate: tuple[float, np.ndarray] | None = None
    cuts: int = 0


class _Worker:
    def __init__(self, cm: CompiledModel, pool: CutPool, lock: threading.Lock, config: SolverConfig):
        self.cm = cm
        self.config = config
        self.lock = lock
        self.pc = _LockedCore(cm, pool, lock, config.seed)

    def _integral(self, x: np.ndarray) -> bool:
        b = self.cm.binaries
        if not b.size:
            return True
        v = x[b]
        return bool(np.all(np.abs(v - np.round(v)) <= INT_TOL))

    def process(self, node: _Node, cutoff: float, max_rounds: int | None) -> _NodeOutcome:
        cm = self.cm
        lb = cm.lb.copy()
        ub = cm.ub.copy()
        lb[cm.binaries] = node.fix_lo
        ub[cm.binaries] = node.fix_hi
        self.pc.purge(self.config.max_active_cuts)
        self.pc.core.set_bounds(lb, ub)
        tail = self.config.tail_rounds if max_rounds is not None else 0
        res = run_oa(self.pc, self.config.oa_tol, max_rounds, cutoff=cutoff, keep_going=self._integral,
                     tail_rounds=tail, tail_tol=self.config.tail_tol)
        out = _NodeOutcome(node, "branch", cuts=res.cuts_added)
        st = res.outcome.status
        if st is LpStatus.INFEASIBLE:
            out.status = "infeasible"
            return out
        if st is LpStatus.UNBOUNDED:
            raise ValueError("continuous relaxation is unbounded; the model needs bounded variables")
        out.bound = res.outcome.objective_value
        out.x = res.outcome.x
        if res.cutoff_hit or out.bound >= cutoff:
            out.status = "cutoff"
            return out
        if self._integral(out.x):
            out.status = "integral"
            out.candidate = self._polish(out.x, lb, ub)
            if out.candidate is not None:
                # the polish LP fixes every binary; its value bounds this subtree
                out.bound = min(out.bound, out.candidate[0])
        return out

    def _polish(self, x: np.ndarray, lb: np.ndarray, ub: np.ndarray):
        cm = self.cm
        vals = np.round(x[cm.binaries])
        plb, pub = lb.copy(), ub.copy()
        plb[cm.binaries] = vals
        pub[cm.binaries] = vals
        self.pc.core.set_bounds(plb, pub)
        res = run_oa(self.pc, POLISH_TOL, None)
        self.pc.core.set_bounds(lb, ub)
        if res.outcome.status is not LpStatus.OPTIMAL:
            return None
        px = res.outcome.x.copy()
        px[cm.binaries] = vals
        ok, _ = eval_feasible(cm.model, {i: float(v) for i, v in enumerate(px)}, tol=ACCEPT_TOL)
        if not ok:
            return None
        return cm.objective(px), px


class _LockedCore(PooledCore):
    """``PooledCore`` whose pool access is serialized for threaded search."""

    def __init__(self, cm, pool, lock, seed):
        self.lock = lock
        super().__init__(cm, pool, seed=seed)

    def sync(self) -> None:
        with self.lock:
            blocks = self.pool.blocks[self._synced:]
            self._synced = len(self.pool.blocks)
        for A, b in blocks:
            self.core.add_rows(A, np.full(A.shape[0], -math.inf), b)

    def add_cuts(self, A, b) -> None:
        with self.lock:
            self.pool.add(A, b)
        self.sync()


class _PseudoCosts:
    def __init__(self, n: int):
        self.sum = np.zeros((2, n))
        self.cnt = np.zeros((2, n))

    def update(self, pos: int, direction: int, frac: float, gain: float) -> None:
        if frac > 0:
            self.sum[direction, pos] += max(gain, 0.0) / frac
            self.cnt[direction, pos] += 1

    def score(self, pos: np.ndarray, f: np.ndarray) -> np.ndarray:
        known = self.cnt.sum(axis=1) > 0
        avg = np.ones(2)
        for d in (0, 1):
            if known[d]:
                avg[d] = self.sum[d][self.cnt[d] > 0].mean()
        down = np.where(self.cnt[0, pos] > 0, self.sum[0, pos] / np.maximum(self.cnt[0, pos], 1), avg[0])
        up = np.where(self.cnt[1, pos] > 0, self.sum[1, pos] / np.maximum(self.cnt[1, pos], 1), avg[1])
        return np.maximum(down * f, 1e-6) * np.maximum(up * (1 - f), 1e-6)


def _pick_branch(x: np.ndarray, binaries: np.ndarray, config: SolverConfig, pcosts: _PseudoCosts,
                 priority: np.ndarray | None = None):
    v = x[binaries]
    f = v - np.floor(v)
    dist = np.minimum(f, 1 - f)
    cand = np.flatnonzero(dist > INT_TOL)
    if not cand.size:
        return None
    if priority is not None:
        top = priority[cand].max()
        cand = cand[priority[cand] == top]
    if config.branching is Branching.PSEUDO_COST:
        score = pcosts.score(cand, f[cand])
    else:
        score = dist[cand]
    # argmax returns the first maximum, i.e. the lowest variable id
    best = cand[int(np.argmax(score))]
    return int(best), float(v[best]), float(f[best])


def _try_candidate(cm: CompiledModel, px):
    if px is None:
        return None
    px = np.asarray(px, dtype=np.float64)
    px[cm.binaries] = np.round(px[cm.binaries])
    ok, _ = eval_feasible(cm.model, {i: float(v) for i, v in enumerate(px)}, tol=ACCEPT_TOL)
    if not ok:
        return None
    return cm.objective(px), px


def _check(m: ConicModel) -> None:
    defects = validate(m)
    if defects:
        raise InvalidModelError(defects)


def solve(m: ConicModel, config: SolverConfig | None = None, heuristic=None,
          priorities=None) -> SolveResult:
    """Minimize ``m`` exactly (up to the gap targets) with binaries enforced.

    ``heuristic``, if given, maps an LP point to a candidate point (array over
    all variables) or ``None``. It runs at the root and every
    ``config.heuristic_every`` nodes; candidates are accepted only if they
    satisfy the true conic rows. ``priorities`` maps variable ids to integers;
    branching considers only fractional binaries of the highest priority
    present (default 0 for unlisted ones).
    """
    config = config or SolverConfig()
    _check(m)
    t0 = time.perf_counter()
    lifted = implied_bound_rows(m) if config.lift_implied_bounds else []
    cm = CompiledModel(m, config.cone_source, extra_ineqs=lifted)
    nb = cm.binaries.size
    for b in cm.binaries:
        cm.lb[b] = max(cm.lb[b], 0.0)
        cm.ub[b] = min(cm.ub[b], 1.0)

    pool = CutPool(cm.n)
    pool.add(*cm.initial_cuts())
    lock = threading.Lock()
    workers = [_Worker(cm, pool, lock, config) for _ in range(config.threads)]
    pcosts = _PseudoCosts(nb)
    prio = None
    if priorities:
        prio = np.array([priorities.get(int(b), 0) for b in cm.binaries])

    primal = math.inf
    incumbent: np.ndarray | None = None
    closed_bound = math.inf       # lowest bound among subtrees removed without an open descendant
    cuts = 0
    nodes = 0
    seq = 0
    heap: list = []

    def key(node: _Node):
        if config.node_selection is NodeSelection.DEPTH_FIRST:
            return (-node.depth, node.bound, node.seq)
        return (node.bound, node.seq)

    def finish(status: SolveStatus, dual: float, root: float) -> SolveResult:
        point = None if incumbent is None else {i: float(v) for i, v in enumerate(incumbent)}
        dual = min(dual, primal)
        return SolveResult(status, point, primal, dual, relative_gap(primal, dual), nodes, cuts, root,
                           time.perf_counter() - t0)

    def prune_level() -> float:
        if not math.isfinite(primal):
            return math.inf
        return primal - max(config.abs_gap, config.rel_gap * abs(primal))

    def open_bound() -> float:
        return min((n.bound for _, n in heap), default=math.inf)

    if cm.trivially_infeasible:
        return finish(SolveStatus.INFEASIBLE, math.inf, math.inf)

    root = _Node(-math.inf, 0, seq, cm.lb[cm.binaries].copy(), cm.ub[cm.binaries].copy())
    seq += 1
    pending = [root]
    root_bound = math.nan
    last_log = 0
    last_heur = 0

    while True:
        if pending:
            batch = pending
            pending = []
        else:
            if not heap:
                break
            dual = min(open_bound(), closed_bound)
            if math.isfinite(primal) and primal - dual <= max(config.abs_gap, config.rel_gap * max(abs(primal), 1e-10)):
                break
            if config.node_limit is not None and nodes >= config.node_limit:
                return finish(SolveStatus.GAP_LIMIT, dual, root_bound)
            if time.perf_counter() - t0 > config.time_limit:
                return finish(SolveStatus.TIME_LIMIT, dual, root_bound)
            batch = []
            room = len(workers)
            if config.node_limit is not None:
                room = min(room, config.node_limit - nodes)
            while heap and len(batch) < room:
                _, node = heapq.heappop(heap)
                if node.bound >= prune_level():
                    closed_bound = min(closed_bound, node.bound)
                    continue
                batch.append(node)
            if not batch:
                continue
            nodes += len(batch)

        cutoff = prune_level()
        is_root = batch[0] is root
        rounds = None if is_root else config.max_oa_rounds
        if len(batch) == 1:
            outcomes = [workers[0].process(batch[0], cutoff, rounds)]
        else:
            with ThreadPoolExecutor(len(batch)) as ex:
                futs = [ex.submit(w.process, n, cutoff, rounds) for w, n in zip(workers, batch)]
                outcomes = [f.result() for f in futs]

        for out in outcomes:
            cuts += out.cuts
            node = out.node
            if is_root:
                root_bound = out.bound if out.status != "infeasible" else math.inf
            if node.branch is not None and out.status in ("branch", "integral") and math.isfinite(node.bound):
                pos, direction, _, frac = node.branch
                pcosts.update(pos, direction, frac if direction == 0 else 1 - frac, out.bound - node.bound)
            if out.status == "infeasible":
                continue
            if out.status == "cutoff":
                closed_bound = min(closed_bound, out.bound)
                continue
            if out.status == "integral":
                if out.candidate is not None:
                    val, px = out.candidate
                    if val < primal:
                        primal, incumbent = val, px
                        log.info("new incumbent %.10g at node %d", val, nodes)
                    closed_bound = min(closed_bound, out.bound)
                    continue
                # polish rejected the point; fall through and branch if anything is fractional
            pick = _pick_branch(out.x, cm.binaries, config, pcosts, prio)
            if pick is None:
                log.warning("integral node could not be certified; dropping it (bound %.10g)", out.bound)
                closed_bound = min(closed_bound, out.bound)
                continue
            pos, val, frac = pick
            for direction in (1, 0):
                lo = node.fix_lo.copy()
                hi = node.fix_hi.copy()
                if direction == 1:
                    lo[pos] = 1.0
                else:
                    hi[pos] = 0.0
                child = _Node(out.bound, node.depth + 1, seq, lo, hi, (pos, direction, val, frac))
                seq += 1
                heapq.heappush(heap, (key(child), child))

        if heuristic is not None and (is_root or (config.heuristic_every and nodes - last_heur >= config.heuristic_every)):
            last_heur = nodes
            lp_x = next((o.x for o in reversed(outcomes) if o.x is not None), None)
            if lp_x is not None:
                cand = _try_candidate(cm, heuristic(lp_x))
                if cand is not None and cand[0] < primal:
                    primal, incumbent = cand
                    log.info("heuristic incumbent %.10g at node %d", primal, nodes)

        if config.log_every and nodes - last_log >= config.log_every:
            last_log = nodes
            dual = min(open_bound(), closed_bound, primal)
            log.info("nodes=%d incumbent=%.10g bound=%.10g gap=%.3g cuts=%d time=%.1fs",
                     nodes, primal, dual, relative_gap(primal, dual), cuts, time.perf_counter() - t0)

        if is_root and config.node_limit == 0:
            dual = min(open_bound(), closed_bound) if heap else closed_bound
            if incumbent is not None and relative_gap(primal, min(dual, primal)) <= config.rel_gap:
                return finish(SolveStatus.OPTIMAL, dual, root_bound)
            if incumbent is None and not heap and not math.isfinite(closed_bound):
                return finish(SolveStatus.INFEASIBLE, math.inf, root_bound)
            return finish(SolveStatus.GAP_LIMIT, dual, root_bound)

    if incumbent is None:
        return finish(SolveStatus.INFEASIBLE, math.inf, root_bound)
    dual = min(open_bound(), closed_bound)
    return finish(SolveStatus.OPTIMAL, dual, root_bound)


def root_bound(m: ConicModel, config: SolverConfig | None = None) -> float:
    """Continuous relaxation value at the root, with the OA loop run to a
    violation of at most 1e-8 so that bounds from different models compare."""
    config = config or SolverConfig()
    _check(m)
    cm = CompiledModel(m, config.cone_source)
    if cm.trivially_infeasible:
        return math.inf
    pool = CutPool(cm.n)
    pool.add(*cm.initial_cuts())
    pc = PooledCore(cm, pool, seed=config.seed)
    res = run_oa(pc, ROOT_TOL, ROOT_ROUND_CAP)
    if res.outcome.status is LpStatus.INFEASIBLE:
        return math.inf
    if res.outcome.status is LpStatus.UNBOUNDED:
        return -math.inf
    return res.outcome.objective_value
