"""Brute-force ground truth over occupancy states, for toy instances only.

A state is the set of occupied vertices, encoded as a K-bit integer.  One
time slice maps a state to a successor by sending every robot along one edge
(waits included) with distinct destinations; this is exactly the set of 0/1
slice matrices with the given row support, so rotations and swaps are
admitted just as in the flow formulation.
"""

from __future__ import annotations

from collections import deque
from fractions import Fraction
from itertools import product

from .errors import BudgetExceeded, Infeasible
from .instance import Instance

MAX_VERTICES = 16
MAX_ROBOTS = 3
MAX_HORIZON = 6


def encode(vertices) -> int:
    s = 0
    for v in vertices:
        s |= 1 << int(v)
    return s


def decode(state: int) -> list[int]:
    out, v = [], 0
    while state:
        if state & 1:
            out.append(v)
        state >>= 1
        v += 1
    return out


def _budget(inst: Instance, T: int | None = None) -> None:
    if inst.n_vertices > MAX_VERTICES:
        raise BudgetExceeded(f"K={inst.n_vertices} > {MAX_VERTICES}")
    if len(inst.robots) > MAX_ROBOTS:
        raise BudgetExceeded(f"N={len(inst.robots)} > {MAX_ROBOTS}")
    if T is not None and T > MAX_HORIZON:
        raise BudgetExceeded(f"T={T} > {MAX_HORIZON}")


def _out_edges(inst: Instance) -> dict[int, list[int]]:
    out: dict[int, list[int]] = {}
    for e, (i, _) in enumerate(inst.edges):
        out.setdefault(i, []).append(e)
    return out


def _transitions(state: int, out: dict[int, list[int]], dst, row) -> dict[int, object]:
    occupied = decode(state)
    best: dict[int, object] = {}
    for choice in product(*(out.get(v, []) for v in occupied)):
        heads = [int(dst[e]) for e in choice]
        if len(set(heads)) != len(heads):
            continue
        nxt = encode(heads)
        c = sum(row[e] for e in choice)
        if nxt not in best or c < best[nxt]:
            best[nxt] = c
    return best


def step_transitions(state: int, inst: Instance, t: int, horizon: int | None = None) -> list[tuple[int, object]]:
    """Successor states of ``state`` over slice ``t`` with their cheapest slice cost.

    Costs are in the scaled integer units of the instance's cost table for
    ``horizon`` slices (default ``max(t, instance horizon)``).
    """
    _budget(inst)
    T = max(t, inst.horizon) if horizon is None else horizon
    row = inst.cost_table(T).values[t - 1].tolist()
    best = _transitions(state, _out_edges(inst), inst.dst.tolist(), row)
    return sorted(best.items())


def _dp(inst: Instance, T: int, weight) -> int:
    """Min over plans of sum_t weight(t)[edge]; ``weight(t)`` returns a per-edge list."""
    if len(inst.robots) != len(inst.targets):
        raise Infeasible("robot and target counts differ")
    start, goal = encode(inst.robots), encode(inst.targets)
    if T == 0:
        if start != goal:
            raise Infeasible("horizon 0 but robots are not on the targets")
        return 0
    out = _out_edges(inst)
    dst = inst.dst.tolist()
    layer: dict[int, object] = {start: 0}
    for t in range(1, T + 1):
        row = weight(t)
        cache: dict[int, dict[int, object]] = {}
        nxt: dict[int, object] = {}
        for s, c0 in layer.items():
            trans = cache.get(s)
            if trans is None:
                trans = cache[s] = _transitions(s, out, dst, row)
            for s2, c in trans.items():
                v = c0 + c
                if s2 not in nxt or v < nxt[s2]:
                    nxt[s2] = v
        layer = nxt
    if goal not in layer:
        raise Infeasible(f"target occupancy unreachable in {T} steps")
    return layer[goal]


def brute_force_min_cost(inst: Instance, T: int | None = None) -> int:
    """Exact minimum cost in the instance's scaled integer units."""
    T = inst.horizon if T is None else int(T)
    _budget(inst, T)
    if T == 0:
        return _dp(inst, 0, None)
    values = inst.cost_table(T).values
    return _dp(inst, T, lambda t: values[t - 1].tolist())


def brute_force_min_cost_value(inst: Instance, T: int | None = None) -> Fraction:
    T = inst.horizon if T is None else int(T)
    return Fraction(brute_force_min_cost(inst, T), inst.cost_table(max(T, 1)).scale)


def brute_force_min_moves(inst: Instance, T: int | None = None) -> int:
    """Fewest non-wait unit moves of any feasible plan over ``T`` slices."""
    T = inst.horizon if T is None else int(T)
    _budget(inst, T)
    row = [0 if i == j else 1 for i, j in inst.edges]
    return _dp(inst, T, lambda t: row)


def brute_force_min_makespan(inst: Instance) -> int:
    """Smallest T for which the target occupancy is reachable (breadth-first)."""
    _budget(inst)
    if len(inst.robots) != len(inst.targets):
        raise Infeasible("robot and target counts differ")
    start, goal = encode(inst.robots), encode(inst.targets)
    out = _out_edges(inst)
    dst = inst.dst.tolist()
    zero = [0] * inst.n_edges
    depth = {start: 0}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        if s == goal:
            T = depth[s]
            assert T <= len(inst.robots) + inst.n_vertices - 1, "makespan bound N + K - 1 violated"
            return T
        for s2 in _transitions(s, out, dst, zero):
            if s2 not in depth:
                depth[s2] = depth[s] + 1
                queue.append(s2)
    raise Infeasible("target occupancy is unreachable")
