"""Exact integral MAPF: min-cost flow on the node-split time-expanded network."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np

from . import timeexp
from .errors import Infeasible
from .flow import max_flow_value, min_cost_flow
from .instance import ExponentialMakespan, Instance, Uniform
from .plan import TransportPlan

__all__ = [
    "SolveReport", "TransportPlan", "solve_p1", "solve_on_network", "is_feasible",
    "min_makespan_search", "solve_makespan_exponential", "min_moves_costs",
]


@dataclass
class SolveReport:
    cost_scaled: int  # exact objective in units of 1/scale
    scale: int
    makespan: int
    moves: int
    horizon: int
    wall_time: float
    augmentations: int = 0
    heap_pops: int = 0
    n_arcs: int = 0
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def cost(self) -> Fraction:
        return Fraction(self.cost_scaled, self.scale)

    def to_dict(self) -> dict[str, Any]:
        return {
            "cost": float(self.cost),
            "cost_scaled": str(self.cost_scaled) if abs(self.cost_scaled) >= 2**53 else self.cost_scaled,
            "scale": self.scale,
            "makespan": self.makespan,
            "moves": self.moves,
            "horizon": self.horizon,
            "wall_time": self.wall_time,
            "augmentations": self.augmentations,
            "heap_pops": self.heap_pops,
            "n_arcs": self.n_arcs,
            **self.extra,
        }


def _plan_cost(plan: TransportPlan, values: np.ndarray) -> int:
    if values.dtype == object:
        return sum(int(f) * c for f, c in zip(plan.flows.reshape(-1).tolist(), values.reshape(-1).tolist()) if f)
    return int((plan.flows * values).sum())


def _trivial(inst: Instance, T: int, start: float) -> tuple[TransportPlan, SolveReport]:
    plan = TransportPlan.empty(inst, 0)
    return plan, SolveReport(0, inst.cost_table(1).scale, 0, 0, T, time.perf_counter() - start)


def solve_on_network(inst: Instance, teg: timeexp.TimeExpandedGraph, objective_values: np.ndarray,
                     backend: str = "auto") -> tuple[TransportPlan, SolveReport]:
    """Solve the flow on a prebuilt network and report cost under ``objective_values``.

    ``objective_values`` is the ``(T, E)`` table the reported cost is measured
    with; it may differ from the arc costs the network was built with (the
    projection step optimises a modified cost but reports the original one).
    """
    start = time.perf_counter()
    res = min_cost_flow(teg.n_nodes, teg.tail, teg.head, teg.cap, teg.cost, teg.supply, backend=backend)
    plan = timeexp.flow_to_plan(teg, inst, res.flow)
    report = SolveReport(
        cost_scaled=_plan_cost(plan, objective_values),
        scale=inst.cost_table(teg.horizon).scale,
        makespan=plan.makespan,
        moves=plan.moves,
        horizon=teg.horizon,
        wall_time=time.perf_counter() - start,
        augmentations=res.augmentations,
        heap_pops=res.heap_pops,
        n_arcs=teg.n_arcs,
    )
    return plan, report


def solve_p1(inst: Instance, horizon: int | None = None, backend: str = "auto") -> tuple[TransportPlan, SolveReport]:
    """Minimum-cost integral plan over ``horizon`` slices (default: the instance horizon).

    Raises :class:`Infeasible` when the robots cannot all reach targets in time.
    """
    T = inst.horizon if horizon is None else int(horizon)
    start = time.perf_counter()
    if len(inst.robots) != len(inst.targets):
        raise Infeasible(f"{len(inst.robots)} robots but {len(inst.targets)} targets")
    if T == 0:
        if set(inst.robots) != set(inst.targets):
            raise Infeasible("horizon 0 and robots are not on the targets")
        return _trivial(inst, T, start)
    table = inst.cost_table(T)
    teg = timeexp.build(inst, T)
    plan, report = solve_on_network(inst, teg, table.values, backend=backend)
    report.wall_time = time.perf_counter() - start
    return plan, report


def is_feasible(inst: Instance, horizon: int) -> bool:
    """Cost-free feasibility test (max-flow on the network)."""
    if len(inst.robots) != len(inst.targets):
        return False
    if horizon == 0:
        return set(inst.robots) == set(inst.targets)
    N = len(inst.robots)
    if N == 0:
        return True
    sub = inst.with_costs(Uniform())
    teg = timeexp.build(sub, horizon, costs=np.zeros((horizon, inst.n_edges), dtype=np.int64))
    return max_flow_value(teg.n_nodes, teg.tail, teg.head, teg.cap, teg.supply) == N


def min_makespan_search(inst: Instance, backend: str = "auto", return_calls: bool = False):
    """Smallest feasible horizon within ``[0, N + K - 1]``.

    Probes grow geometrically (0, 1, 2, 4, ...) up to the ``N + K - 1`` bound,
    then bisect the last bracket; each probe is a cost-free max-flow test, and
    one :func:`solve_p1` call produces the plan at the minimum.  Returns
    ``(T_star, plan)``, plus the number of probes if ``return_calls``.
    """
    N, K = len(inst.robots), inst.n_vertices
    bound = N + K - 1
    calls = 0

    def feasible(T):
        nonlocal calls
        calls += 1
        return is_feasible(inst, T)

    if feasible(0):
        hi = 0
    else:
        lo, hi = 0, 1
        while not feasible(hi):
            if hi >= bound:
                raise Infeasible(f"no feasible plan even at T = N + K - 1 = {bound}")
            lo, hi = hi, min(2 * hi, bound)
        # invariant: lo infeasible, hi feasible
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if feasible(mid):
                hi = mid
            else:
                lo = mid
    plan, _ = solve_p1(inst, hi, backend=backend)
    calls += 1
    return (hi, plan, calls) if return_calls else (hi, plan)


def solve_makespan_exponential(inst: Instance, horizon: int | None = None,
                               B: int | None = None) -> tuple[TransportPlan, SolveReport]:
    """Min-cost plan under ``c_t = B**t * base`` costs, computed with Python integers.

    The base costs are the instance's own slice-1 costs (already scaled to
    integers); an existing :class:`ExponentialMakespan` model is used as is.
    The optimum's makespan is the minimum makespan.  Cost magnitudes grow like
    ``B**T``; horizons beyond a few dozen slices become slow, not wrong.
    """
    T = inst.horizon if horizon is None else int(horizon)
    model = inst.costs if isinstance(inst.costs, ExponentialMakespan) else ExponentialMakespan(inst.costs, B)
    exp_inst = inst.with_costs(model)
    plan, report = solve_p1(exp_inst, T, backend="python")
    report.extra["B"] = model.resolve_B(exp_inst)
    return plan, report


def min_moves_costs(inst: Instance, horizon: int | None = None) -> Instance:
    """Instance with unit moves and a wait cost small enough that moves dominate.

    Non-target waits cost ``1 / (2 |E| T)``: even ``N * T`` of them stay below
    one move, so the min-cost plan is also a min-move plan.
    """
    T = inst.horizon if horizon is None else int(horizon)
    wait = Fraction(1, 2 * max(inst.n_edges, 1) * max(T, 1))
    return inst.with_costs(Uniform(Fraction(1), wait, Fraction(0)))
