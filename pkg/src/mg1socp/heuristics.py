"""Primal heuristics for the congested location model.

A solution is a level per facility (``-1`` for closed) plus the serving
facility of every customer. Costs are computed per station so that a move
only re-prices the stations it touches.
"""
from __future__ import annotations

import math

import numpy as np

from mg1socp.location import Assignment, LocationInstance

MAX_PASSES = 100
_EPS = 1e-9


class _Costs:
    def __init__(self, inst: LocationInstance):
        self.inst = inst
        self.c2 = (inst.mu * inst.sigma) ** 2
        self.travel = inst.d * inst.lam[None, :]        # (I, J)

    def station(self, i: int, k: int, load: float) -> float:
        """Establishing plus waiting cost of facility ``i`` at level ``k``; inf if unstable."""
        if k < 0:
            return 0.0 if load <= 0.0 else math.inf
        mu = self.inst.mu[i, k]
        if load >= mu:
            return math.inf
        tw = load * load * (1.0 + self.c2[i, k]) / (2.0 * mu * (mu - load)) + load / mu
        return float(self.inst.f[i, k] + self.inst.w[i] * tw)

    def best_level(self, i: int, load: float) -> tuple[int, float]:
        best = (-1, math.inf)
        for k in range(self.inst.n_levels):
            c = self.station(i, k, load)
            if c < best[1]:
                best = (k, c)
        return best


def _total(costs: _Costs, levels, serve, loads) -> float:
    tot = sum(costs.station(i, int(levels[i]), loads[i]) for i in range(len(levels)))
    return tot + float(sum(costs.travel[serve[j], j] for j in range(len(serve))))


def greedy(inst: LocationInstance, levels, order=None):
    """Assign customers (largest demand first) to the open facility with the
    smallest marginal cost. Returns ``serve`` or ``None`` if someone cannot be
    placed without overloading a station."""
    costs = _Costs(inst)
    levels = np.asarray(levels, dtype=np.int64)
    n_j = inst.n_customers
    loads = np.zeros(inst.n_facilities)
    serve = np.full(n_j, -1, dtype=np.int64)
    open_ = np.flatnonzero(levels >= 0)
    order = np.argsort(-inst.lam, kind="stable") if order is None else order
    for j in order:
        best, best_c = -1, math.inf
        for i in open_:
            k = int(levels[i])
            c = (costs.station(i, k, loads[i] + inst.lam[j]) - costs.station(i, k, loads[i])
                 + costs.travel[i, j])
            if c < best_c:
                best, best_c = int(i), c
        if best < 0:
            return None
        serve[j] = best
        loads[best] += inst.lam[j]
    return serve


def local_search(inst: LocationInstance, levels, serve):
    """Improve by customer moves, level changes, closing and opening
    facilities until no move helps. Returns ``(levels, serve, cost)``."""
    costs = _Costs(inst)
    n_i, n_k, n_j = inst.shape
    levels = np.array(levels, dtype=np.int64)
    serve = np.array(serve, dtype=np.int64)
    lam = inst.lam
    loads = np.zeros(n_i)
    np.add.at(loads, serve, lam)

    def station(i, load):
        return costs.station(i, int(levels[i]), load)

    for _ in range(MAX_PASSES):
        improved = False
        # customer moves
        for j in range(n_j):
            a = int(serve[j])
            base = station(a, loads[a] - lam[j]) - station(a, loads[a]) - costs.travel[a, j]
            best, best_d = -1, -_EPS
            for b in np.flatnonzero(levels >= 0):
                if b == a:
                    continue
                d = base + station(b, loads[b] + lam[j]) - station(b, loads[b]) + costs.travel[b, j]
                if d < best_d:
                    best, best_d = int(b), d
            if best >= 0:
                loads[a] -= lam[j]
                loads[best] += lam[j]
                serve[j] = best
                improved = True
        # level changes, and closing facilities with no customers
        for i in range(n_i):
            if levels[i] < 0:
                continue
            if loads[i] <= 0.0:
                levels[i] = -1
                improved = True
                continue
            k, c = costs.best_level(i, loads[i])
            if k != levels[i] and c < station(i, loads[i]) - _EPS:
                levels[i] = k
                improved = True
        cur = _total(costs, levels, serve, loads)
        # close one facility and re-place its customers
        for i in np.flatnonzero(levels >= 0):
            trial = levels.copy()
            trial[i] = -1
            if not np.any(trial >= 0):
                continue
            s = _reassign(inst, costs, trial, serve, loads, np.flatnonzero(serve == i))
            if s is None:
                continue
            tl = np.zeros(n_i)
            np.add.at(tl, s, lam)
            for h in np.flatnonzero(trial >= 0):
                trial[h] = costs.best_level(h, tl[h])[0]
            if np.any((trial < 0) & (tl > 0)):
                continue
            c = _total(costs, trial, s, tl)
            if c < cur - _EPS:
                levels, serve, loads, cur = trial, s, tl, c
                improved = True
        # open one facility and pull over the customers it would serve better
        for i in np.flatnonzero(levels < 0):
            best = None
            for k in range(n_k):
                trial = levels.copy()
                trial[i] = k
                s, tl = serve.copy(), loads.copy()
                for j in np.argsort(-(costs.travel[s, np.arange(n_j)] - costs.travel[i]), kind="stable"):
                    a = int(s[j])
                    d = (costs.station(i, k, tl[i] + lam[j]) - costs.station(i, k, tl[i]) + costs.travel[i, j]
                         + costs.station(a, int(trial[a]), tl[a] - lam[j]) - costs.station(a, int(trial[a]), tl[a])
                         - costs.travel[a, j])
                    if d < 0:
                        s[j] = i
                        tl[a] -= lam[j]
                        tl[i] += lam[j]
                if tl[i] <= 0:
                    continue
                c = _total(costs, trial, s, tl)
                if c < cur - _EPS and (best is None or c < best[0]):
                    best = (c, trial, s, tl)
            if best is not None:
                cur, levels, serve, loads = best
                improved = True
        if not improved:
            break
    return levels, serve, _total(costs, levels, serve, loads)


def _reassign(inst, costs, levels, serve, loads, movers):
    s = serve.copy()
    tl = loads.copy()
    for j in movers:
        tl[s[j]] -= inst.lam[j]
        s[j] = -1
    for j in sorted(movers, key=lambda j: -inst.lam[j]):
        best, best_c = -1, math.inf
        for b in np.flatnonzero(levels >= 0):
            k_new, _ = costs.best_level(b, tl[b] + inst.lam[j])
            if k_new < 0:
                continue
            c = (costs.best_level(b, tl[b] + inst.lam[j])[1] - costs.station(b, int(levels[b]), tl[b])
                 + costs.travel[b, j])
            if c < best_c:
                best, best_c = int(b), c
        if best < 0:
            return None
        s[j] = best
        tl[best] += inst.lam[j]
    return s


def improve(inst: LocationInstance, a: Assignment) -> Assignment:
    """Local search started from a feasible assignment."""
    levels = np.where(a.x.any(axis=1), a.x.argmax(axis=1), -1)
    serve = a.y.sum(axis=1).argmax(axis=0)
    lv, sv, _ = local_search(inst, levels, serve)
    return Assignment.from_choice(inst, [None if k < 0 else int(k) for k in lv], sv.tolist())


def from_fractional(inst: LocationInstance, x: np.ndarray, y: np.ndarray) -> Assignment | None:
    """Round fractional ``x`` (I, K) and ``y`` (I, K, J) and polish by local search.

    Each customer goes to the facility carrying most of its assignment mass;
    each facility then takes its cheapest stable level for that load. If a
    load is too large for every level the customers are re-placed greedily
    over all facilities at their largest level.
    """
    costs = _Costs(inst)
    n_i, n_k, n_j = inst.shape
    if n_j == 0:
        return Assignment(np.zeros((n_i, n_k)), np.zeros((n_i, n_k, 0)))
    serve = y.sum(axis=1).argmax(axis=0)
    loads = np.zeros(n_i)
    np.add.at(loads, serve, inst.lam)
    levels = np.array([costs.best_level(i, loads[i])[0] if loads[i] > 0 else -1 for i in range(n_i)])
    if np.any((levels < 0) & (loads > 0)):
        levels = np.where(x.sum(axis=1) > 0.5, n_k - 1, -1)
        serve = greedy(inst, levels) if np.any(levels >= 0) else None
        if serve is None:
            serve = greedy(inst, np.full(n_i, n_k - 1))
            if serve is None:
                return None
            levels = np.full(n_i, n_k - 1)
    lv, sv, _ = local_search(inst, levels, serve)
    return Assignment.from_choice(inst, [None if k < 0 else int(k) for k in lv], sv.tolist())
