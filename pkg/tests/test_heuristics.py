import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_instance
from mg1socp.heuristics import from_fractional, greedy, improve, local_search
from mg1socp.location import Assignment, brute_force, check_feasible, evaluate


def test_greedy_feasible():
    inst = random_instance(0)
    serve = greedy(inst, [1, 1, 1])
    a = Assignment.from_choice(inst, [1, 1, 1], serve.tolist())
    assert check_feasible(inst, a)[0]


def test_greedy_reports_failure():
    inst = random_instance(0)
    inst.lam = inst.lam * 100
    assert greedy(inst, [0, -1, -1]) is None


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_local_search_never_worse_and_feasible(seed):
    inst = random_instance(seed)
    levels = np.array([1, 1, 1])
    serve = greedy(inst, levels)
    start = evaluate(inst, Assignment.from_choice(inst, levels.tolist(), serve.tolist()))
    lv, sv, cost = local_search(inst, levels, serve)
    a = Assignment.from_choice(inst, [None if k < 0 else int(k) for k in lv], sv.tolist())
    assert check_feasible(inst, a)[0]
    assert cost == pytest.approx(evaluate(inst, a), rel=1e-12)
    assert cost <= start + 1e-9
    assert cost >= brute_force(inst).value - 1e-9


@given(st.integers(0, 10_000), st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_rounding_any_fractional_point(seed, pseed):
    inst = random_instance(seed)
    rng = np.random.default_rng(pseed)
    x = rng.uniform(0, 1, inst.f.shape)
    y = rng.uniform(0, 1, (*inst.f.shape, inst.n_customers))
    a = from_fractional(inst, x, y)
    assert a is not None and check_feasible(inst, a)[0]


def test_improve_reaches_oracle_on_small_cases():
    hits = 0
    for seed in range(10):
        inst = random_instance(seed)
        start = Assignment.from_choice(inst, [1, 1, 1], greedy(inst, [1, 1, 1]).tolist())
        hits += evaluate(inst, improve(inst, start)) <= brute_force(inst).value * (1 + 1e-9)
    assert hits >= 5
