"""Seeded benchmark instances with economy-of-scale establishment costs.

One ``numpy.random.Generator(Philox(seed))`` drives every draw, in this order:

1. facilities ``i = 0..I-1``: base cost ``f_i``, base capacity ``b_i``,
   waiting cost ``w_i``, then (Euclidean travel only) coordinates ``(x, y)``;
2. levels, ``i`` outer and ``k`` inner: one uniform ``u_ik`` giving
   ``sigma_ik = (cv_lo + (cv_hi - cv_lo) u_ik) / mu_ik``;
3. customers ``j = 0..J-1``: demand ``lam_j``, then (Euclidean) coordinates;
4. pairs, ``i`` outer and ``j`` inner (uniform travel only): ``d_ij``.

Every draw is a scalar ``uniform(lo, hi)``. Rates are ``mu_ik = b_i m_k`` for
the level multipliers ``m`` (default ``1, 2, ..., K``) and establishment costs
are ``f_ik = (f_i / b_i) ** ((K - 1) / (K - 1 + k - 1)) * mu_ik`` with ``k``
counted from 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from mg1socp.errors import InvalidSpecError
from mg1socp.location import LocationInstance

DEMAND_HEADROOM = 0.9


@dataclass(frozen=True)
class GenSpec:
    n_facilities: int
    n_customers: int
    n_levels: int
    seed: int = 0
    base_cost_range: tuple[float, float] = (50.0, 100.0)
    base_capacity_range: tuple[float, float] = (10.0, 20.0)
    demand_range: tuple[float, float] = (1.0, 5.0)
    level_multipliers: tuple[float, ...] | None = None
    travel: str = "euclidean"                     # or "uniform"
    travel_range: tuple[float, float] = (0.0, 10.0)
    grid: float = 100.0                           # side of the square for coordinates
    travel_scale: float = 0.1                     # cost per unit distance
    waiting_cost_range: tuple[float, float] = (5.0, 20.0)
    cv_range: tuple[float, float] = (1.0, 3.0)
    name: str = "custom"

    def multipliers(self) -> tuple[float, ...]:
        if self.level_multipliers is None:
            return tuple(float(k) for k in range(1, self.n_levels + 1))
        return tuple(float(m) for m in self.level_multipliers)

    def validate(self) -> None:
        if min(self.n_facilities, self.n_customers) < 0 or self.n_levels < 1:
            raise InvalidSpecError("need nonnegative facility/customer counts and at least one level")
        ranges = {
            "base_cost_range": self.base_cost_range, "base_capacity_range": self.base_capacity_range,
            "demand_range": self.demand_range, "travel_range": self.travel_range,
            "waiting_cost_range": self.waiting_cost_range, "cv_range": self.cv_range,
        }
        for name, (lo, hi) in ranges.items():
            if not (math.isfinite(lo) and math.isfinite(hi) and 0 <= lo <= hi):
                raise InvalidSpecError(f"{name} must satisfy 0 <= lo <= hi, got {(lo, hi)}")
        if self.base_capacity_range[0] <= 0:
            raise InvalidSpecError("base capacities must be positive")
        m = self.multipliers()
        if len(m) != self.n_levels or any(v <= 0 for v in m) or any(b <= a for a, b in zip(m, m[1:])):
            raise InvalidSpecError("level multipliers must be positive, increasing and one per level")
        if self.travel not in ("euclidean", "uniform"):
            raise InvalidSpecError(f"unknown travel scheme {self.travel!r}")
        if not (self.grid >= 0 and self.travel_scale >= 0):
            raise InvalidSpecError("grid and travel_scale must be nonnegative")


PRESETS = {
    # (facilities, customers, levels) as in the large published benchmarks
    "vj-large": dict(n_facilities=25, n_customers=400, n_levels=5,
                     base_cost_range=(3000.0, 9000.0), base_capacity_range=(20.0, 40.0),
                     waiting_cost_range=(50.0, 150.0), travel_scale=1.0),
    "holmberg-large": dict(n_facilities=30, n_customers=200, n_levels=10,
                           base_cost_range=(2000.0, 6000.0), base_capacity_range=(10.0, 30.0),
                           waiting_cost_range=(50.0, 150.0), travel_scale=1.0),
    # small enough for exhaustive enumeration
    "desk-small": dict(n_facilities=3, n_customers=5, n_levels=2),
}


def preset(name: str, seed: int = 0) -> GenSpec:
    if name not in PRESETS:
        raise InvalidSpecError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return GenSpec(seed=seed, name=name, **PRESETS[name])


def default_filename(spec: GenSpec) -> str:
    return f"{spec.name}-s{spec.seed}.json"


def establishment_cost(f_i: float, b_i: float, n_levels: int, k: int, mu_ik: float) -> float:
    """``(f_i / b_i) ** ((K - 1) / (K - 1 + k - 1)) * mu_ik`` for level ``k >= 1``.

    With a single level the exponent is 0/0 and is taken as 1, which is its
    value at ``k = 1`` for every other ``K``.
    """
    if k < 1:
        raise ValueError("levels are counted from 1")
    den = n_levels - 1 + k - 1
    expo = 1.0 if den == 0 else (n_levels - 1) / den
    return (f_i / b_i) ** expo * mu_ik


def generate(spec: GenSpec) -> LocationInstance:
    spec.validate()
    rng = np.random.Generator(np.random.Philox(spec.seed))
    n_i, n_j, n_k = spec.n_facilities, spec.n_customers, spec.n_levels
    euclid = spec.travel == "euclidean"

    def draw(rng_range):
        return float(rng.uniform(rng_range[0], rng_range[1]))

    f_base, b_base, w = np.zeros(n_i), np.zeros(n_i), np.zeros(n_i)
    fac_xy = np.zeros((n_i, 2))
    for i in range(n_i):
        f_base[i] = draw(spec.base_cost_range)
        b_base[i] = draw(spec.base_capacity_range)
        w[i] = draw(spec.waiting_cost_range)
        if euclid:
            fac_xy[i] = draw((0.0, spec.grid)), draw((0.0, spec.grid))

    mult = spec.multipliers()
    mu = np.array([[b_base[i] * mult[k] for k in range(n_k)] for i in range(n_i)]).reshape(n_i, n_k)
    sigma = np.zeros((n_i, n_k))
    f = np.zeros((n_i, n_k))
    lo, hi = map(float, spec.cv_range)
    for i in range(n_i):
        for k in range(n_k):
            u = float(rng.uniform(0.0, 1.0))
            sigma[i, k] = (lo + (hi - lo) * u) / mu[i, k]
            f[i, k] = establishment_cost(f_base[i], b_base[i], n_k, k + 1, mu[i, k])

    lam = np.zeros(n_j)
    cus_xy = np.zeros((n_j, 2))
    for j in range(n_j):
        lam[j] = draw(spec.demand_range)
        if euclid:
            cus_xy[j] = draw((0.0, spec.grid)), draw((0.0, spec.grid))

    if euclid:
        diff = fac_xy[:, None, :] - cus_xy[None, :, :]
        d = spec.travel_scale * np.sqrt((diff * diff).sum(axis=2))
    else:
        d = np.zeros((n_i, n_j))
        for i in range(n_i):
            for j in range(n_j):
                d[i, j] = draw(spec.travel_range)

    cap = float(mu.max(axis=1).sum()) if n_i else 0.0
    scale = 1.0
    if n_j and lam.sum() >= cap:
        scale = float(DEMAND_HEADROOM * cap / lam.sum()) if cap > 0 else 0.0
        lam = lam * scale
    meta = {
        "preset": spec.name,
        "seed": str(spec.seed),
        "generator": "numpy Philox, scalar uniforms: facilities, levels, customers, pairs",
        "rate_scheme": "mu_ik = b_i * m_k, m = " + ",".join(repr(m) for m in mult),
        "travel": (f"euclidean on [0,{float(spec.grid)!r}]^2 x {float(spec.travel_scale)!r}" if euclid
                   else f"uniform {tuple(map(float, spec.travel_range))!r}"),
        "cv_range": f"{lo!r},{hi!r}",
        "demand_rescale": repr(scale),
    }
    return LocationInstance(f=f, d=d, lam=lam, mu=mu, sigma=sigma, w=w, metadata=meta)


def with_seed(spec: GenSpec, seed: int) -> GenSpec:
    return replace(spec, seed=seed)
