"""Facility location with M/G/1 congestion: instance data, direct
evaluation of the nonconvex objective, and an exhaustive oracle.

Each open facility ``i`` at capacity level ``k`` is an M/G/1 station with
rate ``mu[i][k]`` and service-time deviation ``sigma[i][k]``; its congestion
cost is ``w[i]`` times the expected number in system.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from mg1socp import kernels
from mg1socp.errors import (
    InfeasibleAssignmentError,
    InstanceTooLargeError,
    InvalidInstanceError,
    NoFeasibleAssignmentError,
    UnstableQueueError,
)

MAX_CV = 100.0
ORACLE_MAX_STATIONS = 8
ORACLE_MAX_CUSTOMERS = 8


@dataclass
class LocationInstance:
    f: np.ndarray       # (I, K) establishment cost
    d: np.ndarray       # (I, J) travel cost per service
    lam: np.ndarray     # (J,) demand rate
    mu: np.ndarray      # (I, K) service rate
    sigma: np.ndarray   # (I, K) service-time standard deviation
    w: np.ndarray       # (I,) congestion cost per unit time
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=np.float64)
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.sigma = np.asarray(self.sigma, dtype=np.float64)
        self.lam = np.asarray(self.lam, dtype=np.float64).reshape(-1)
        self.w = np.asarray(self.w, dtype=np.float64).reshape(-1)
        n_i = self.w.shape[0]
        n_j = self.lam.shape[0]
        n_k = self.f.shape[1] if self.f.ndim == 2 else 0
        self.f = self.f.reshape(n_i, n_k)
        self.mu = self.mu.reshape(n_i, n_k)
        self.sigma = self.sigma.reshape(n_i, n_k)
        self.d = np.asarray(self.d, dtype=np.float64).reshape(n_i, n_j)
        self.validate()

    @property
    def n_facilities(self) -> int:
        return self.w.shape[0]

    @property
    def n_customers(self) -> int:
        return self.lam.shape[0]

    @property
    def n_levels(self) -> int:
        return self.f.shape[1]

    @property
    def shape(self) -> tuple[int, int, int]:
        """``(|I|, |K|, |J|)``."""
        return self.n_facilities, self.n_levels, self.n_customers

    def validate(self) -> None:
        arrays = {"f": self.f, "d": self.d, "lambda": self.lam, "mu": self.mu, "sigma": self.sigma, "w": self.w}
        for name, a in arrays.items():
            if not np.all(np.isfinite(a)):
                raise InvalidInstanceError(f"{name} has non-finite entries")
        if np.any(self.mu <= 0):
            raise InvalidInstanceError("service rates must be positive")
        for name in ("f", "d", "lambda", "sigma", "w"):
            if np.any(arrays[name] < 0):
                raise InvalidInstanceError(f"{name} must be nonnegative")
        if np.any(self.mu * self.sigma > MAX_CV):
            raise InvalidInstanceError(f"coefficient of variation mu*sigma above {MAX_CV}; probable data error")

    def capacity_ok(self) -> bool:
        """Aggregate check: total demand below the largest total capacity."""
        cap = self.mu.max(axis=1).sum() if self.n_levels else 0.0
        return self.n_customers == 0 or self.lam.sum() < cap

    # -- JSON ------------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "facilities": self.n_facilities,
            "customers": self.n_customers,
            "levels": self.n_levels,
            "f": self.f.tolist(),
            "d": self.d.tolist(),
            "lambda": self.lam.tolist(),
            "mu": self.mu.tolist(),
            "sigma": self.sigma.tolist(),
            "w": self.w.tolist(),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LocationInstance":
        n_i, n_j, n_k = int(data["facilities"]), int(data["customers"]), int(data["levels"])
        inst = cls(
            f=np.array(data["f"], dtype=np.float64).reshape(n_i, n_k),
            d=np.array(data["d"], dtype=np.float64).reshape(n_i, n_j),
            lam=data["lambda"],
            mu=np.array(data["mu"], dtype=np.float64).reshape(n_i, n_k),
            sigma=np.array(data["sigma"], dtype=np.float64).reshape(n_i, n_k),
            w=data["w"],
            metadata=dict(data.get("metadata", {})),
        )
        if inst.shape != (n_i, n_k, n_j):
            raise InvalidInstanceError("array shapes disagree with the declared set sizes")
        return inst

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=False) + "\n"

    @classmethod
    def loads(cls, text: str) -> "LocationInstance":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "LocationInstance":
        with open(path) as fh:
            return cls.loads(fh.read())


@dataclass
class Assignment:
    x: np.ndarray   # (I, K) 0/1
    y: np.ndarray   # (I, K, J) 0/1

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.int8)
        self.y = np.asarray(self.y, dtype=np.int8)

    @classmethod
    def from_choice(cls, inst: LocationInstance, levels, serve) -> "Assignment":
        """Build from ``levels[i]`` (level index or ``None`` for closed) and
        ``serve[j]`` (the facility serving customer ``j``)."""
        n_i, n_k, n_j = inst.shape
        x = np.zeros((n_i, n_k), dtype=np.int8)
        y = np.zeros((n_i, n_k, n_j), dtype=np.int8)
        for i, k in enumerate(levels):
            if k is not None:
                x[i, k] = 1
        for j, i in enumerate(serve):
            y[i, levels[i] if levels[i] is not None else 0, j] = 1
        return cls(x, y)

    def loads(self, inst: LocationInstance) -> np.ndarray:
        return np.einsum("ikj,j->ik", self.y.astype(np.float64), inst.lam)

    def key(self) -> tuple:
        return tuple(self.x.ravel().tolist()) + tuple(self.y.ravel().tolist())

    def __eq__(self, other):
        if not isinstance(other, Assignment):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.y, other.y)

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "y": self.y.tolist()}


def congestion_tw(i: int, k: int, total_lambda: float, inst: LocationInstance) -> float:
    """Expected total waiting (number in system) at station ``(i, k)``."""
    mu = float(inst.mu[i, k])
    sigma = float(inst.sigma[i, k])
    lam = float(total_lambda)
    if lam >= mu:
        raise UnstableQueueError(f"station ({i},{k}) overloaded: {lam} >= {mu}")
    return lam * lam * (1.0 + mu * mu * sigma * sigma) / (2.0 * mu * (mu - lam)) + lam / mu


def check_feasible(inst: LocationInstance, a: Assignment) -> tuple[bool, list[str]]:
    n_i, n_k, n_j = inst.shape
    bad = []
    if a.x.shape != (n_i, n_k) or a.y.shape != (n_i, n_k, n_j):
        return False, ["shape: assignment arrays do not match the instance"]
    if np.any((a.x != 0) & (a.x != 1)):
        bad.append("(13) x not binary")
    if np.any((a.y != 0) & (a.y != 1)):
        bad.append("(14) y not binary")
    served = a.y.sum(axis=(0, 1))
    for j in np.flatnonzero(served != 1):
        bad.append(f"(9) customer {j} assigned {int(served[j])} times")
    over = np.argwhere(a.y > a.x[:, :, None])
    for i, k, j in over:
        bad.append(f"(10) customer {j} assigned to unopened station ({i},{k})")
    levels = a.x.sum(axis=1)
    for i in np.flatnonzero(levels > 1):
        bad.append(f"(11) facility {i} opened at {int(levels[i])} levels")
    loads = a.loads(inst)
    for i, k in np.argwhere(loads >= inst.mu):
        bad.append(f"(12) station ({i},{k}) load {loads[i, k]:g} not below rate {inst.mu[i, k]:g}")
    return not bad, bad


@dataclass(frozen=True)
class CostBreakdown:
    establishing: float
    waiting: float
    traveling: float

    @property
    def total(self) -> float:
        return self.establishing + self.waiting + self.traveling

    def percentages(self) -> tuple[float, float, float]:
        t = self.total
        if t == 0:
            return 0.0, 0.0, 0.0
        return 100 * self.establishing / t, 100 * self.waiting / t, 100 * self.traveling / t


def cost_breakdown(inst: LocationInstance, a: Assignment) -> CostBreakdown:
    ok, bad = check_feasible(inst, a)
    if not ok:
        raise InfeasibleAssignmentError(bad)
    n_i, n_k, n_j = inst.shape
    loads = a.loads(inst)
    establishing = float((inst.f * a.x).sum())
    waiting = 0.0
    for i in range(n_i):
        for k in range(n_k):
            if a.x[i, k]:
                waiting += float(inst.w[i]) * congestion_tw(i, k, loads[i, k], inst)
    traveling = float(np.einsum("ij,j,ikj->", inst.d, inst.lam, a.y.astype(np.float64)))
    return CostBreakdown(establishing, waiting, traveling)


def split_cost_breakdown(inst: LocationInstance, x, y, tol: float = 1e-6) -> CostBreakdown:
    """Cost of a fractional point: ``x`` in ``[0, 1]`` per station, ``y``
    splitting each customer's demand over stations.

    Used to check solves with relaxed assignments, where a customer may be
    served by several stations. Waiting cost is charged at every station
    whose level is (numerically) chosen.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    served = y.sum(axis=(0, 1))
    if np.any(np.abs(served - 1.0) > tol):
        raise InfeasibleAssignmentError(["(9) some customer demand is not fully served"])
    if np.any(y > x[:, :, None] + tol):
        raise InfeasibleAssignmentError(["(10) demand routed to an unopened station"])
    loads = np.einsum("ikj,j->ik", y, inst.lam)
    waiting = 0.0
    for i, k in np.argwhere(loads > 0):
        waiting += float(inst.w[i]) * congestion_tw(int(i), int(k), loads[i, k], inst)
    establishing = float((inst.f * x).sum())
    traveling = float(np.einsum("ij,j,ikj->", inst.d, inst.lam, y))
    return CostBreakdown(establishing, waiting, traveling)


def evaluate(inst: LocationInstance, a: Assignment) -> float:
    """Objective value: establishing + congestion + travel cost."""
    return cost_breakdown(inst, a).total


@dataclass
class OracleResult:
    best: Assignment
    value: float
    enumerated: int

    def to_dict(self) -> dict:
        return {"value": self.value, "enumerated": self.enumerated, "assignment": self.best.to_dict()}


def _level_choices(n_k: int):
    # options per facility ordered so x bit-vectors come out lexicographically descending
    return list(range(n_k)) + [None]


def brute_force(inst: LocationInstance) -> OracleResult:
    """Exact optimum by enumerating every level choice and customer assignment.

    Ties go to the lexicographically greatest ``(x, y)`` 0/1 vector, which
    prefers opening lower-indexed facilities and lower levels. ``enumerated``
    counts candidates: each level choice contributes ``|open|^|J|`` customer
    assignments, and at least one.
    """
    n_i, n_k, n_j = inst.shape
    if n_i * n_k > ORACLE_MAX_STATIONS or n_j > ORACLE_MAX_CUSTOMERS:
        raise InstanceTooLargeError(
            f"oracle limited to |I||K| <= {ORACLE_MAX_STATIONS} and |J| <= {ORACLE_MAX_CUSTOMERS}, got {inst.shape}")
    best_val = math.inf
    best = None
    count = 0
    for levels in itertools.product(_level_choices(n_k), repeat=n_i):
        stations = [(i, k) for i, k in enumerate(levels) if k is not None]
        count += max(1, len(stations) ** n_j)
        fixed = 0.0
        for i, k in stations:
            fixed += float(inst.f[i, k])
        val, assign = kernels.best_assignment(
            np.array([i for i, _ in stations], dtype=np.int64),
            np.array([inst.mu[i, k] for i, k in stations], dtype=np.float64),
            np.array([inst.sigma[i, k] for i, k in stations], dtype=np.float64),
            np.array([inst.w[i] for i, _ in stations], dtype=np.float64),
            inst.lam, inst.d, fixed,
        )
        if assign is not None and val < best_val:
            best_val = val
            best = Assignment.from_choice(inst, levels, [stations[s][0] for s in assign])
    if best is None:
        raise NoFeasibleAssignmentError("no assignment satisfies the stability and assignment constraints")
    return OracleResult(best, evaluate(inst, best), count)
