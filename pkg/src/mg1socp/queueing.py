"""M/G/1 performance metrics and a discrete-event simulation oracle.

All metrics are the Pollaczek-Khinchine moment formulas for a single-server
FIFO queue with Poisson arrivals (rate ``lam``), service rate ``mu`` and
service-time standard deviation ``sigma``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import stats

from mg1socp import kernels
from mg1socp.errors import InvalidDistributionError, UnstableQueueError


class MetricKind(str, Enum):
    LQ = "Lq"
    L = "L"
    WQ = "Wq"
    W = "W"
    TWQ = "TWq"
    TW = "TW"


@dataclass(frozen=True)
class QueueParams:
    lam: float
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"service rate must be positive, got {self.mu}")
        if not self.lam >= 0:
            raise ValueError(f"arrival rate must be nonnegative, got {self.lam}")
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")

    @property
    def rho(self) -> float:
        return self.lam / self.mu

    @property
    def cv(self) -> float:
        """Coefficient of variation of the service time, ``mu * sigma``."""
        return self.mu * self.sigma


def _check_stable(p: QueueParams) -> None:
    if p.lam >= p.mu:
        raise UnstableQueueError(f"unstable queue: lambda={p.lam} >= mu={p.mu}")


def lq(p: QueueParams) -> float:
    """Expected number waiting in queue."""
    _check_stable(p)
    rho = p.rho
    return (rho * rho + p.lam * p.lam * p.sigma * p.sigma) / (2.0 * (1.0 - rho))


def l(p: QueueParams) -> float:  # noqa: E741
    """Expected number in system."""
    return p.rho + lq(p)


def wq(p: QueueParams) -> float:
    """Expected time in queue."""
    _check_stable(p)
    return (p.rho + p.lam * p.mu * p.sigma * p.sigma) / (2.0 * (p.mu - p.lam))


def w(p: QueueParams) -> float:
    """Expected time in system."""
    return wq(p) + 1.0 / p.mu


_DISPATCH = {
    MetricKind.LQ: lq,
    MetricKind.TWQ: lq,
    MetricKind.L: l,
    MetricKind.TW: l,
    MetricKind.WQ: wq,
    MetricKind.W: w,
}


def metric(kind: MetricKind | str, p: QueueParams) -> float:
    return _DISPATCH[MetricKind(kind)](p)


# -- simulation ---------------------------------------------------------------

SERVICE_KINDS = ("exponential", "deterministic", "uniform", "two_point")


@dataclass(frozen=True)
class ServiceDist:
    """Service-time distribution family.

    The mean and standard deviation come from the queue parameters; the
    family only fixes the shape. ``high_prob`` is the probability of the upper
    atom of a two-point law; by default the lower atom sits at zero, which
    works for any coefficient of variation.
    """

    kind: str
    high_prob: float | None = None

    def __post_init__(self):
        if self.kind not in SERVICE_KINDS:
            raise InvalidDistributionError(f"unknown service distribution {self.kind!r}")
        if self.high_prob is not None and not 0.0 < self.high_prob <= 1.0:
            raise InvalidDistributionError("high_prob must lie in (0, 1]")

    def sampler(self, mean: float, sd: float):
        """Return ``draw(rng, n)`` producing ``n`` service times."""
        if self.kind == "exponential":
            if not math.isclose(sd, mean, rel_tol=1e-9):
                raise InvalidDistributionError(
                    f"exponential service needs sigma = 1/mu ({mean}), got {sd}")
            return lambda rng, n: rng.exponential(mean, n)
        if self.kind == "deterministic":
            if sd != 0.0:
                raise InvalidDistributionError(f"deterministic service needs sigma = 0, got {sd}")
            return lambda rng, n: np.full(n, mean)
        if self.kind == "uniform":
            half = math.sqrt(3.0) * sd
            if half > mean:
                raise InvalidDistributionError(
                    "uniform service with this sigma puts mass on negative times")
            return lambda rng, n: rng.uniform(mean - half, mean + half, n)
        # two-point
        if sd == 0.0:
            return lambda rng, n: np.full(n, mean)
        cv = sd / mean
        p = self.high_prob if self.high_prob is not None else 1.0 / (1.0 + cv * cv)
        if p == 1.0:
            raise InvalidDistributionError("two-point law with high_prob=1 has zero variance")
        low = mean - sd * math.sqrt(p / (1.0 - p))
        high = mean + sd * math.sqrt((1.0 - p) / p)
        if low < -1e-12 * mean:
            raise InvalidDistributionError(
                "two-point service with this high_prob puts mass on negative times")
        low = max(low, 0.0)
        return lambda rng, n: np.where(rng.random(n) < p, high, low)


@dataclass(frozen=True)
class SimEstimate:
    mean: float
    half_width: float
    samples: int

    def contains(self, value: float) -> bool:
        return abs(self.mean - value) <= self.half_width


def simulate(p: QueueParams, service_dist: ServiceDist | str, customers: int = 1_000_000,
             warmup: int | None = None, seed: int = 0, batches: int = 32) -> dict[MetricKind, SimEstimate]:
    """Estimate all six metrics by simulating a FIFO M/G/1 queue.

    Waits come from the Lindley recursion. Lq and L are time averages
    computed per batch as total customer time divided by the batch's
    arrival span. Confidence half-widths use batch means with a Student-t
    quantile. Deterministic for a fixed ``seed``.
    """
    if isinstance(service_dist, str):
        service_dist = ServiceDist(service_dist)
    _check_stable(p)
    if p.lam == 0.0:
        raise ValueError("simulation needs a positive arrival rate")
    if warmup is None:
        warmup = customers // 10
    if customers <= warmup:
        raise ValueError("customers must exceed warmup")
    if customers - warmup < 2 * batches:
        raise ValueError("too few post-warmup customers for the batch count")

    draw = service_dist.sampler(1.0 / p.mu, p.sigma)
    rng = np.random.default_rng(seed)
    # one extra arrival closes the last batch's time span
    inter = rng.exponential(1.0 / p.lam, customers + 1)
    service = draw(rng, customers)
    arrivals = np.cumsum(inter)
    waits = kernels.lindley(inter[:customers], service)
    sojourn = waits + service

    edges = np.linspace(warmup, customers, batches + 1).astype(np.int64)
    wq_b = np.empty(batches)
    w_b = np.empty(batches)
    lq_b = np.empty(batches)
    l_b = np.empty(batches)
    for b in range(batches):
        lo, hi = edges[b], edges[b + 1]
        span = arrivals[hi] - arrivals[lo]
        wq_sum = waits[lo:hi].sum()
        w_sum = sojourn[lo:hi].sum()
        wq_b[b] = wq_sum / (hi - lo)
        w_b[b] = w_sum / (hi - lo)
        lq_b[b] = wq_sum / span
        l_b[b] = w_sum / span

    tq = stats.t.ppf(0.975, batches - 1)
    n_obs = int(customers - warmup)

    def est(values):
        return SimEstimate(float(values.mean()), float(tq * values.std(ddof=1) / math.sqrt(batches)), n_obs)

    lq_e, l_e = est(lq_b), est(l_b)
    return {
        MetricKind.LQ: lq_e,
        MetricKind.L: l_e,
        MetricKind.WQ: est(wq_b),
        MetricKind.W: est(w_b),
        MetricKind.TWQ: lq_e,
        MetricKind.TW: l_e,
    }
