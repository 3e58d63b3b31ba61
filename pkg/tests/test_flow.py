from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from mapfot.errors import Infeasible
from mapfot.flow import max_flow_value, min_cost_flow


def _lp_cost(n, tail, head, cap, cost, supply):
    A = np.zeros((n, len(tail)))
    A[tail, np.arange(len(tail))] += 1
    A[head, np.arange(len(tail))] -= 1
    res = linprog(cost, A_eq=A, b_eq=supply, bounds=list(zip([0] * len(cap), cap)), method="highs")
    return res


@st.composite
def networks(draw):
    n = draw(st.integers(3, 7))
    m = draw(st.integers(n, 3 * n))
    tail = draw(st.lists(st.integers(0, n - 1), min_size=m, max_size=m))
    head = [draw(st.integers(0, n - 1).filter(lambda h, t=t: h != t)) for t in tail]
    cap = draw(st.lists(st.integers(1, 3), min_size=m, max_size=m))
    cost = draw(st.lists(st.integers(0, 9), min_size=m, max_size=m))
    s, d = draw(st.permutations(range(n)))[:2]
    amount = draw(st.integers(1, 3))
    supply = [0] * n
    supply[s], supply[d] = amount, -amount
    return n, np.array(tail), np.array(head), np.array(cap), np.array(cost), np.array(supply)


@settings(max_examples=80, deadline=None)
@given(networks())
def test_matches_linear_programming(net):
    n, tail, head, cap, cost, supply = net
    lp = _lp_cost(n, tail, head, cap, cost, supply)
    if lp.status != 0:
        with pytest.raises(Infeasible):
            min_cost_flow(n, tail, head, cap, cost, supply)
        return
    for backend in ("numba", "python"):
        res = min_cost_flow(n, tail, head, cap, cost, supply, backend=backend)
        assert res.cost == round(lp.fun)
        assert np.all((res.flow >= 0) & (res.flow <= cap))
        net_out = np.bincount(tail, res.flow, n) - np.bincount(head, res.flow, n)
        assert np.array_equal(net_out.astype(int), supply)


def test_backends_pick_same_flow():
    rng = np.random.default_rng(0)
    n = 30
    tail = rng.integers(0, n, 120)
    head = (tail + rng.integers(1, n, 120)) % n
    cost = rng.integers(0, 3, 120)  # many ties
    supply = np.zeros(n, int)
    supply[:3], supply[-3:] = 1, -1
    cap = np.ones(120, int)
    if max_flow_value(n, tail, head, cap, supply) < 3:
        pytest.skip("random network infeasible")
    a = min_cost_flow(n, tail, head, cap, cost, supply, backend="numba")
    b = min_cost_flow(n, tail, head, cap, cost, supply, backend="python")
    assert np.array_equal(a.flow, b.flow)


def test_big_integer_costs():
    big = 10**30
    tail, head = np.array([0, 0, 1, 2]), np.array([1, 2, 3, 3])
    cost = np.array([big, 1, big, big + 5], dtype=object)
    res = min_cost_flow(4, tail, head, np.ones(4, int), cost, np.array([1, 0, 0, -1]))
    assert res.cost == big + 6
    assert res.flow.tolist() == [0, 1, 0, 1]


def test_negative_cost_rejected():
    with pytest.raises(ValueError):
        min_cost_flow(2, [0], [1], [1], [-1], [1, -1])


def test_unbalanced_supply():
    with pytest.raises(Infeasible):
        min_cost_flow(2, [0], [1], [1], [0], [1, 0])
