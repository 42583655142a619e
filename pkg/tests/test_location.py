import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_instance, tiny_instance
from mg1socp import kernels
from mg1socp.errors import (
    InfeasibleAssignmentError,
    InstanceTooLargeError,
    InvalidInstanceError,
    NoFeasibleAssignmentError,
    UnstableQueueError,
)
from mg1socp.location import (
    Assignment,
    LocationInstance,
    brute_force,
    check_feasible,
    congestion_tw,
    cost_breakdown,
    evaluate,
    split_cost_breakdown,
)
from mg1socp.queueing import MetricKind, QueueParams, metric


@pytest.mark.parametrize("lam,sigma,expected", [(1.0, 0.5, 1.0), (0.0, 0.5, 0.0), (1.0, 0.0, 0.75)])
def test_congestion_examples(lam, sigma, expected):
    inst = LocationInstance(f=[[0.0]], d=[[0.0]], lam=[1.0], mu=[[2.0]], sigma=[[sigma]], w=[1.0])
    assert congestion_tw(0, 0, lam, inst) == pytest.approx(expected, rel=1e-15)


def test_congestion_unstable():
    with pytest.raises(UnstableQueueError):
        congestion_tw(0, 0, 2.0, tiny_instance())


@given(st.floats(0.1, 100), st.floats(0, 0.999), st.floats(0, 3))
def test_congestion_matches_tw(mu, rho, cv):
    inst = LocationInstance(f=[[0.0]], d=[[0.0]], lam=[1.0], mu=[[mu]], sigma=[[cv / mu]], w=[1.0])
    lam = rho * mu
    assert congestion_tw(0, 0, lam, inst) == pytest.approx(
        metric(MetricKind.TW, QueueParams(lam, mu, cv / mu)), rel=1e-12, abs=1e-300)


def test_evaluate_tiny():
    a = Assignment([[1]], [[[1]]])
    assert evaluate(tiny_instance(), a) == 11.0
    assert evaluate(tiny_instance(d=3.0), a) == 14.0


def test_unassigned_customer():
    with pytest.raises(InfeasibleAssignmentError) as exc:
        evaluate(tiny_instance(), Assignment([[1]], [[[0]]]))
    assert any(v.startswith("(9)") for v in exc.value.violations)


def test_check_feasible_families():
    inst = random_instance(0, 2, 2, 2)
    a = Assignment(np.zeros((2, 2)), np.zeros((2, 2, 2)))
    a.y[0, 0, :] = 1
    ok, bad = check_feasible(inst, a)
    assert not ok and any(b.startswith("(10)") for b in bad)
    a.x[0, :] = 1
    ok, bad = check_feasible(inst, a)
    assert any(b.startswith("(11)") for b in bad)


def test_load_exactly_mu_is_unstable():
    inst = LocationInstance(f=[[1.0]], d=[[0.0]], lam=[2.0], mu=[[2.0]], sigma=[[0.1]], w=[1.0])
    ok, bad = check_feasible(inst, Assignment([[1]], [[[1]]]))
    assert not ok and bad[0].startswith("(12)")


def test_invalid_instances():
    with pytest.raises(InvalidInstanceError):
        LocationInstance(f=[[1.0]], d=[[0.0]], lam=[1.0], mu=[[0.0]], sigma=[[0.1]], w=[1.0])
    with pytest.raises(InvalidInstanceError):
        LocationInstance(f=[[-1.0]], d=[[0.0]], lam=[1.0], mu=[[2.0]], sigma=[[0.1]], w=[1.0])
    with pytest.raises(InvalidInstanceError):
        LocationInstance(f=[[1.0]], d=[[0.0]], lam=[1.0], mu=[[2.0]], sigma=[[51.0]], w=[1.0])


def test_instance_json_round_trip(tmp_path):
    inst = random_instance(4)
    inst.metadata = {"seed": "4"}
    inst.save(tmp_path / "i.json")
    back = LocationInstance.load(tmp_path / "i.json")
    for name in ("f", "d", "lam", "mu", "sigma", "w"):
        assert np.array_equal(getattr(back, name), getattr(inst, name))
    assert back.metadata == inst.metadata
    assert back.dumps() == inst.dumps()


def test_oracle_tiny():
    r = brute_force(tiny_instance())
    assert r.value == 11.0 and r.enumerated == 2
    assert r.best == Assignment([[1]], [[[1]]])


def test_oracle_tie_goes_to_lower_index():
    inst = LocationInstance(f=[[5.0], [5.0]], d=[[1.0], [1.0]], lam=[1.0], mu=[[3.0], [3.0]],
                            sigma=[[0.2], [0.2]], w=[1.0, 1.0])
    r = brute_force(inst)
    assert r.best.x.tolist() == [[1], [0]]


def test_oracle_no_feasible():
    inst = LocationInstance(f=[[1.0]], d=[[0.0, 0.0]], lam=[1.5, 1.5], mu=[[2.0]], sigma=[[0.1]], w=[1.0])
    with pytest.raises(NoFeasibleAssignmentError):
        brute_force(inst)


def test_oracle_too_large():
    with pytest.raises(InstanceTooLargeError):
        brute_force(random_instance(0, 3, 3, 5))
    with pytest.raises(InstanceTooLargeError):
        brute_force(random_instance(0, 2, 2, 9))


def _all_assignments(inst):
    n_i, n_k, n_j = inst.shape
    for levels in itertools.product([None, *range(n_k)], repeat=n_i):
        open_ = [i for i in range(n_i) if levels[i] is not None]
        if not open_:
            if n_j == 0:
                yield Assignment.from_choice(inst, levels, [])
            continue
        for serve in itertools.product(open_, repeat=n_j):
            yield Assignment.from_choice(inst, levels, serve)


@pytest.mark.parametrize("seed", range(4))
def test_oracle_is_minimum_of_exhaustive_list(seed):
    inst = random_instance(seed, 2, 2, 4)
    inst.mu = inst.mu * 0.8    # some assignments become unstable
    vals = []
    for a in _all_assignments(inst):
        if check_feasible(inst, a)[0]:
            vals.append(evaluate(inst, a))
    assert vals
    r = brute_force(inst)
    assert r.value == pytest.approx(min(vals), rel=1e-12)
    assert all(r.value <= v * (1 + 1e-12) for v in vals)
    assert r.value == evaluate(inst, r.best)


@given(st.integers(0, 10_000), st.permutations(range(5)))
@settings(max_examples=25)
def test_evaluate_relabel_invariant(seed, perm):
    inst = random_instance(seed)
    r = brute_force(inst)
    perm = list(perm)
    inst2 = LocationInstance(inst.f, inst.d[:, perm], inst.lam[perm], inst.mu, inst.sigma, inst.w)
    a2 = Assignment(r.best.x, r.best.y[:, :, perm])
    assert evaluate(inst2, a2) == pytest.approx(r.value, rel=1e-12)


def test_breakdown_partitions_cost():
    inst = random_instance(2)
    a = brute_force(inst).best
    b = cost_breakdown(inst, a)
    assert b.total == evaluate(inst, a)
    assert sum(b.percentages()) == pytest.approx(100.0)


def test_split_cost_matches_integral():
    inst = random_instance(3)
    a = brute_force(inst).best
    assert split_cost_breakdown(inst, a.x, a.y).total == pytest.approx(evaluate(inst, a), rel=1e-14)
    y = a.y.astype(float) * 0.5
    with pytest.raises(InfeasibleAssignmentError):
        split_cost_breakdown(inst, a.x, y)


@pytest.mark.skipif(not kernels.COMPILED, reason="compiled kernels not built")
@pytest.mark.parametrize("seed", range(6))
def test_compiled_oracle_kernel_matches_fallback(seed):
    inst = random_instance(seed, 3, 2, 5)
    st_ = [(0, 1), (1, 0), (2, 1)]
    args = (np.array([i for i, _ in st_]), np.array([inst.mu[i, k] for i, k in st_]),
            np.array([inst.sigma[i, k] for i, k in st_]), np.array([inst.w[i] for i, _ in st_]),
            inst.lam, inst.d, 1.5)
    v1, a1 = kernels.compiled.best_assignment(*args)
    v2, a2 = kernels.fallback.best_assignment(*args)
    assert v1 == pytest.approx(v2, rel=1e-13)
    assert list(a1) == list(a2)
