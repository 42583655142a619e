"""Conic budget rows ``metric <= rhs`` for one M/G/1 queue whose option and
demand routing are decision variables.

The queue picks one option ``p`` (binary ``X[p]``, rate ``mu[p]``, service
variance ``sigma2[p]``) and receives demand ``Lambda_p = sum_r lam[r] Y[p, r]``.
Each metric is written as a linear budget row over one auxiliary per option
plus one hyperbolic row per option:

* R variant, ``r_p >= Lambda_p^2 / (mu_p - Lambda_p)``:
  ``Lambda_p^2 <= r_p (mu_p - Lambda_p)``.
* S variant, ``s_p >= Lambda_p / (mu_p - Lambda_p)``:
  ``Lambda_p^2 <= (mu_p s_p - Lambda_p)(mu_p - Lambda_p)``.
* BinaryS variant (0/1 ``Y`` only), same ``s_p``:
  ``sum_r lam_r Y_pr^2 <= s_p (mu_p - Lambda_p)``.

With ``c_p = mu_p^2 sigma2_p`` the budgets are

    L, TW   R:  sum (1 + c) r / (2 mu) + Lambda / mu
            S:  sum (1 + c) s / 2 + (1 - c) Lambda / (2 mu)
    W       S:  sum (1 + c) s / (2 mu) + X / mu

and the queue-only metrics drop the service term: ``Lq = L - Lambda/mu``,
``Wq = W - X/mu``, ``TWq = Lq``. ``c`` is snapped to exactly 0 or 1 for
deterministic and exponential service so those budgets carry no stray terms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from mg1socp.conic import HyperbolicConstraint, LinExpr, hyperbolic_to_soc
from mg1socp.model import ConicModel, VarKind
from mg1socp.queueing import MetricKind

CV_SNAP = 1e-12


class Variant(str, Enum):
    R = "R"
    S = "S"
    BINARY_S = "BinaryS"


@dataclass
class GeneralContext:
    mu: np.ndarray              # (P,)
    sigma2: np.ndarray          # (P,) service-time variance
    lam: np.ndarray             # (R,)
    U: np.ndarray               # (P, R) upper bounds on Y
    x_ids: np.ndarray           # (P,) variable ids of X
    y_ids: np.ndarray           # (P, R) variable ids of Y
    rhs: LinExpr
    y_binary: bool = False

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64).reshape(-1)
        self.sigma2 = np.asarray(self.sigma2, dtype=np.float64).reshape(-1)
        self.lam = np.asarray(self.lam, dtype=np.float64).reshape(-1)
        n_p, n_r = self.mu.size, self.lam.size
        self.U = np.asarray(self.U, dtype=np.float64).reshape(n_p, n_r)
        self.x_ids = np.asarray(self.x_ids, dtype=np.int64).reshape(n_p)
        self.y_ids = np.asarray(self.y_ids, dtype=np.int64).reshape(n_p, n_r)
        if np.any(self.mu <= 0):
            raise ValueError("option rates must be positive")
        if np.any(self.sigma2 < 0) or np.any(self.lam < 0) or np.any(self.U < 0):
            raise ValueError("variances, demand rates and bounds must be nonnegative")

    @classmethod
    def standalone(cls, model: ConicModel, mu, sigma2, lam, U=None, y_binary: bool = False,
                   rhs: LinExpr | None = None) -> "GeneralContext":
        """Create ``X``, ``Y`` (and a free ``rh`` variable when ``rhs`` is not
        given) in ``model`` and return the context over them."""
        mu = np.asarray(mu, dtype=np.float64).reshape(-1)
        lam = np.asarray(lam, dtype=np.float64).reshape(-1)
        U = np.ones((mu.size, lam.size)) if U is None else np.asarray(U, dtype=np.float64)
        x_ids = [model.add_binary(f"X[{p}]") for p in range(mu.size)]
        y_ids = [[model.add_binary(f"Y[{p},{r}]") if y_binary
                  else model.add_variable(f"Y[{p},{r}]", lower=0.0, upper=float(U[p, r]))
                  for r in range(lam.size)] for p in range(mu.size)]
        if rhs is None:
            rhs = LinExpr.var(model.add_variable("rh"))
        return cls(mu, sigma2, lam, U, x_ids, y_ids, rhs, y_binary)

    @property
    def n_options(self) -> int:
        return self.mu.size

    def cv2(self) -> np.ndarray:
        """``mu_p^2 sigma2_p`` snapped to exactly 0 or 1 where it is one of those."""
        c = self.mu * self.mu * self.sigma2
        c = np.where(self.sigma2 == 0.0, 0.0, c)
        return np.where(np.abs(c - 1.0) <= CV_SNAP, 1.0, c)

    def load(self, p: int) -> LinExpr:
        return LinExpr.total((int(self.y_ids[p, r]), float(self.lam[r])) for r in range(self.lam.size))


@dataclass
class MetricBundle:
    kind: MetricKind
    variant: Variant
    aux: list[int]
    budget: LinExpr                     # the metric side; the row is budget - rhs <= 0
    linear_eqs: list[LinExpr] = field(default_factory=list)
    linear_ineqs: list[LinExpr] = field(default_factory=list)
    hyperbolic: list[HyperbolicConstraint] = field(default_factory=list)


_QUEUE_ONLY = {MetricKind.LQ: MetricKind.L, MetricKind.TWQ: MetricKind.L, MetricKind.WQ: MetricKind.W}


def budget_terms(ctx: GeneralContext, kind: MetricKind, variant: Variant, aux: list[int],
                 as_printed: bool = False) -> LinExpr:
    """Linear metric side of the budget row over ``aux`` (one id per option).

    ``as_printed`` divides the S-variant auxiliary term of L/TW by ``2 mu``
    instead of 2; that version does not reproduce L at tight auxiliaries and
    exists only for comparison.
    """
    kind = MetricKind(kind)
    variant = Variant(variant)
    base = _QUEUE_ONLY.get(kind, MetricKind.L if kind is MetricKind.TW else kind)
    queue_only = kind in _QUEUE_ONLY
    if base is MetricKind.W and variant is Variant.R:
        raise ValueError("the waiting-time metrics have no R-variant budget; use S or BinaryS")
    c = [float(v) for v in ctx.cv2()]
    out = LinExpr()
    for p in range(ctx.n_options):
        mu = float(ctx.mu[p])
        a = LinExpr.var(aux[p])
        lam_terms = [(int(ctx.y_ids[p, r]), float(ctx.lam[r])) for r in range(ctx.lam.size)]
        if base is MetricKind.W:
            out = out + ((1.0 + c[p]) / (2.0 * mu)) * a
            if not queue_only:
                out = out + LinExpr.var(int(ctx.x_ids[p])) * (1.0 / mu)
        elif variant is Variant.R:
            out = out + ((1.0 + c[p]) / (2.0 * mu)) * a
            if not queue_only:
                out = out + LinExpr.total((k, lam / mu) for k, lam in lam_terms)
        else:
            first = (1.0 + c[p]) / (2.0 * mu) if as_printed else (1.0 + c[p]) / 2.0
            second = -(1.0 + c[p]) if queue_only else (1.0 - c[p])
            out = out + first * a
            if second != 0.0:
                out = out + LinExpr.total((k, second * lam / (2.0 * mu)) for k, lam in lam_terms)
    return out


def metric_constraint(model: ConicModel, ctx: GeneralContext, kind: MetricKind | str,
                      variant: Variant | str = Variant.S, as_printed: bool = False,
                      side_conditions: bool = True) -> MetricBundle:
    """Add ``metric(X, Y) <= ctx.rhs`` to ``model`` and return what was added.

    With ``side_conditions`` the single-choice and routing rows are added as
    well: load within the chosen rate, ``sum X = 1`` and ``Y <= U X``. The
    hyperbolic rows enter ``model`` in their norm form only.
    """
    kind = MetricKind(kind)
    variant = Variant(variant)
    if variant is Variant.BINARY_S and not ctx.y_binary:
        raise ValueError("the BinaryS variant needs binary routing variables")
    if model.soc_secondary:
        raise ValueError("model carries secondary-form rows; metric rows are added in norm form only")
    name = "r" if variant is Variant.R else "s"
    # validates the kind/variant pair before touching the model
    budget_terms(ctx, kind, variant, list(range(ctx.n_options)), as_printed)
    aux = [model.add_variable(f"{name}[{p}]", VarKind.CONTINUOUS, lower=0.0) for p in range(ctx.n_options)]
    budget = budget_terms(ctx, kind, variant, aux, as_printed)
    bundle = MetricBundle(kind, variant, aux, budget)

    if side_conditions:
        loads = LinExpr()
        rates = LinExpr()
        for p in range(ctx.n_options):
            loads = loads + ctx.load(p)
            rates = rates + float(ctx.mu[p]) * LinExpr.var(int(ctx.x_ids[p]))
        bundle.linear_ineqs.append(loads - rates)
        bundle.linear_eqs.append(LinExpr.total((int(x), 1.0) for x in ctx.x_ids) - 1.0)
        for p in range(ctx.n_options):
            for r in range(ctx.lam.size):
                bundle.linear_ineqs.append(LinExpr.var(int(ctx.y_ids[p, r]))
                                           - float(ctx.U[p, r]) * LinExpr.var(int(ctx.x_ids[p])))
    bundle.linear_ineqs.append(budget - ctx.rhs)

    for p in range(ctx.n_options):
        mu = float(ctx.mu[p])
        load = ctx.load(p)
        idle = LinExpr.const(mu) - load
        a = LinExpr.var(aux[p])
        if variant is Variant.R:
            h = HyperbolicConstraint((load,), a, idle)
        elif variant is Variant.S:
            h = HyperbolicConstraint((load,), mu * a - load, idle)
        else:
            rows = tuple(math.sqrt(float(ctx.lam[r])) * LinExpr.var(int(ctx.y_ids[p, r]))
                         for r in range(ctx.lam.size) if ctx.lam[r] > 0)
            h = HyperbolicConstraint(rows or (LinExpr(),), a, idle)
        bundle.hyperbolic.append(h)

    for e in bundle.linear_eqs:
        model.add_eq(e)
    for e in bundle.linear_ineqs:
        model.add_ineq(e)
    for h in bundle.hyperbolic:
        model.add_cone(hyperbolic_to_soc(h))
    return bundle


def tight_aux(ctx: GeneralContext, variant: Variant | str, choice: int, y: np.ndarray) -> np.ndarray:
    """Smallest feasible auxiliaries for option ``choice`` and routing ``y`` (shape ``(P, R)``)."""
    variant = Variant(variant)
    out = np.zeros(ctx.n_options)
    load = float(np.asarray(y, dtype=np.float64)[choice] @ ctx.lam)
    mu = float(ctx.mu[choice])
    if load >= mu:
        raise ValueError("load reaches the service rate")
    out[choice] = load * load / (mu - load) if variant is Variant.R else load / (mu - load)
    return out


def tight_point(ctx: GeneralContext, bundle: MetricBundle, choice: int, y) -> dict[int, float]:
    """Values for ``X``, ``Y`` and the bundle auxiliaries (rhs variables are not set)."""
    y = np.asarray(y, dtype=np.float64).reshape(ctx.y_ids.shape)
    point = {}
    for p in range(ctx.n_options):
        point[int(ctx.x_ids[p])] = 1.0 if p == choice else 0.0
        for r in range(ctx.lam.size):
            point[int(ctx.y_ids[p, r])] = float(y[p, r])
    for vid, v in zip(bundle.aux, tight_aux(ctx, bundle.variant, choice, y)):
        point[vid] = float(v)
    return point


def tight_budget(ctx: GeneralContext, bundle: MetricBundle, choice: int, y) -> float:
    """Metric side of the budget row at the tight auxiliaries."""
    return bundle.budget.evaluate(tight_point(ctx, bundle, choice, y))
