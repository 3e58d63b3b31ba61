from __future__ import annotations

from itertools import product

import pytest

from conftest import corpus
from mapfot import oracle
from mapfot.errors import BudgetExceeded, Infeasible
from mapfot.instance import Instance, Uniform, generate_grid, path_graph

CYCLE3 = ((0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (2, 0))


def _labelled_min_cost(inst: Instance, T: int):
    """Enumerate labelled walks per robot; vertex-disjoint at every time."""
    tab = inst.cost_table(T).values
    out = {}
    for e, (i, j) in enumerate(inst.edges):
        out.setdefault(i, []).append(e)

    def walks(v, t):
        if t == T:
            yield [], v
            return
        for e in out.get(v, []):
            for rest, end in walks(int(inst.dst[e]), t + 1):
                yield [e] + rest, end

    best = None
    robots = list(inst.robots)
    per_robot = [list(walks(r, 0)) for r in robots]
    targets = set(inst.targets)
    for combo in product(*per_robot):
        if {end for _, end in combo} != targets:
            continue
        ok = True
        for t in range(T):
            heads = [int(inst.dst[w[t]]) for w, _ in combo]
            if len(set(heads)) != len(heads):
                ok = False
                break
        if not ok:
            continue
        c = sum(int(tab[t, w[t]]) for w, _ in combo for t in range(T))
        best = c if best is None or c < best else best
    return best


def test_encode_decode():
    assert oracle.encode([0, 3]) == 0b1001
    assert oracle.decode(0b10110) == [1, 2, 4]


def test_rotation_on_three_cycle():
    inst = Instance(3, CYCLE3, (), (0, 1), (1, 2), 1)
    assert oracle.brute_force_min_cost_value(inst) == 2
    assert oracle.brute_force_min_makespan(inst) == 1


def test_full_rotation_with_three_robots():
    inst = Instance(3, CYCLE3, (), (0, 1, 2), (0, 1, 2), 1)
    trans = dict(oracle.step_transitions(0b111, inst, 1))
    # everyone waits (cost 0 at targets) or everyone rotates (3 moves)
    assert trans == {0b111: 0}
    inst2 = inst.with_costs(Uniform(1, 1, 1))
    assert dict(oracle.step_transitions(0b111, inst2, 1)) == {0b111: 3}


def test_step_transitions_single_robot():
    inst = path_graph(3, [1], [2], 1)
    trans = oracle.step_transitions(0b010, inst, 1)
    assert [s for s, _ in trans] == [0b001, 0b010, 0b100]


def test_tiny_path():
    inst = path_graph(4, [0], [3], 3)
    assert oracle.brute_force_min_cost(inst) == 3 * 2  # three moves, scale 2
    with pytest.raises(Infeasible):
        oracle.brute_force_min_cost(inst, 2)
    assert oracle.brute_force_min_makespan(inst) == 3


def test_budget():
    with pytest.raises(BudgetExceeded):
        oracle.brute_force_min_cost(generate_grid(5, 4, 0, 1, 0, horizon=2))
    with pytest.raises(BudgetExceeded):
        oracle.brute_force_min_cost(path_graph(3, [0], [2], 7))


def test_agrees_with_labelled_enumeration():
    n = 0
    for inst in corpus(80, start=500, max_t=3):
        T = inst.horizon
        want = _labelled_min_cost(inst, T) if T else (0 if set(inst.robots) == set(inst.targets) else None)
        if want is None:
            with pytest.raises(Infeasible):
                oracle.brute_force_min_cost(inst)
        else:
            assert oracle.brute_force_min_cost(inst) == want
            n += 1
    assert n >= 20


def test_makespan_bound_holds():
    for inst in corpus(60, start=700):
        try:
            T = oracle.brute_force_min_makespan(inst)
        except Infeasible:
            continue
        assert T <= len(inst.robots) + inst.n_vertices - 1
