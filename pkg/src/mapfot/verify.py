"""Solver-independent plan auditing.

Everything here is computed from the instance and the plan alone, so plans
from any backend (or read back from disk) can be checked the same way.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from .errors import DimensionMismatch
from .instance import Instance, _cost_ordering
from .plan import TransportPlan

CHECKS = ("integrality", "support", "boundary", "gluing", "capacity", "targets_reached",
          "swap_free", "cycle_free")


@dataclass(frozen=True)
class Metrics:
    cost_scaled: int
    scale: int
    makespan: int
    moves: int

    @property
    def cost(self) -> Fraction:
        return Fraction(self.cost_scaled, self.scale)

    def __iter__(self):
        return iter((self.cost, self.makespan, self.moves))


@dataclass
class VerificationReport:
    checks: dict[str, bool]
    hard: tuple[str, ...]
    messages: dict[str, str] = field(default_factory=dict)
    metrics: Metrics | None = None

    @property
    def passed(self) -> bool:
        return all(self.checks[name] for name in self.hard)

    @property
    def failures(self) -> list[str]:
        return [n for n in CHECKS if not self.checks[n]]

    def to_dict(self) -> dict[str, Any]:
        m = self.metrics
        return {
            "passed": self.passed,
            "checks": {n: self.checks[n] for n in CHECKS},
            "hard": list(self.hard),
            "messages": dict(self.messages),
            "metrics": None if m is None else {
                "cost": float(m.cost), "cost_scaled": str(m.cost_scaled), "scale": m.scale,
                "makespan": m.makespan, "moves": m.moves},
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _cost_values(inst: Instance, T: int):
    tab = inst.cost_table(T)
    return tab.values, tab.scale


def metrics(inst: Instance, plan: TransportPlan) -> Metrics:
    """Exact cost (scaled integers), makespan and move count."""
    T = plan.horizon
    if T == 0:
        return Metrics(0, inst.cost_table(1).scale, 0, 0)
    values, scale = _cost_values(inst, T)
    if values.dtype == object:
        total = sum(int(f) * c for f, c in zip(plan.flows.reshape(-1).tolist(), values.reshape(-1).tolist()) if f)
    else:
        total = int((plan.flows.astype(np.int64) * values).sum())
    return Metrics(total, scale, plan.makespan, plan.moves)


def _slice_cycle(src: np.ndarray, dst: np.ndarray) -> list[int] | None:
    """A directed cycle among the given arcs, if one exists (vertices listed)."""
    succ: dict[int, list[int]] = {}
    for i, j in zip(src.tolist(), dst.tolist()):
        succ.setdefault(i, []).append(j)
    state: dict[int, int] = {}
    for root in sorted(succ):
        if state.get(root):
            continue
        stack = [(root, iter(succ.get(root, ())))]
        path = [root]
        state[root] = 1
        while stack:
            v, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                state[v] = 2
                stack.pop()
                path.pop()
            elif state.get(nxt) == 1:
                return path[path.index(nxt):]
            elif not state.get(nxt):
                state[nxt] = 1
                path.append(nxt)
                stack.append((nxt, iter(succ.get(nxt, ()))))
    return None


def check_plan(inst: Instance, plan: TransportPlan, horizon: int | None = None) -> VerificationReport:
    """Run every feasibility and optimality-witness check on ``plan``.

    Swap- and cycle-freeness are hard checks only when the cost model orders
    target waits < other waits < moves; otherwise they are informational.
    """
    flows = np.asarray(plan.flows)
    if flows.ndim != 2 or flows.shape[1] != inst.n_edges:
        raise DimensionMismatch(f"plan has shape {flows.shape}, instance has {inst.n_edges} edges")
    if horizon is not None and flows.shape[0] != horizon:
        raise DimensionMismatch(f"plan horizon {flows.shape[0]} != expected {horizon}")
    T = flows.shape[0]
    checks: dict[str, bool] = {}
    msgs: dict[str, str] = {}

    checks["integrality"] = bool(np.all((flows == 0) | (flows == 1)))
    if not checks["integrality"]:
        msgs["integrality"] = f"entries outside {{0, 1}}: {sorted(set(np.unique(flows).tolist()) - {0, 1})[:5]}"
    checks["support"] = (plan.n_vertices == inst.n_vertices and np.array_equal(plan.src, inst.src)
                         and np.array_equal(plan.dst, inst.dst))
    if not checks["support"]:
        msgs["support"] = "plan columns do not correspond to the instance edge list"
        plan = TransportPlan.for_instance(inst, flows)
    mu, nu = inst.mu.astype(np.int64), inst.nu.astype(np.int64)

    if T == 0:
        same = sorted(inst.robots) == sorted(inst.targets)
        checks.update(boundary=same, gluing=True, capacity=True, targets_reached=same, swap_free=True,
                      cycle_free=True)
        if not same:
            msgs["boundary"] = "empty plan but robots are not on the targets"
    else:
        q = plan.marginals()
        start_ok = np.array_equal(q[0], mu)
        end_ok = np.array_equal(q[T], nu)
        checks["boundary"] = bool(start_ok and end_ok)
        if not start_ok:
            msgs["boundary"] = f"departures at t=1 differ from robots at {np.flatnonzero(q[0] != mu)[:5].tolist()}"
        elif not end_ok:
            msgs["boundary"] = f"arrivals at t=T differ from targets at {np.flatnonzero(q[T] != nu)[:5].tolist()}"
        bad_glue = [t for t in range(1, T) if not np.array_equal(plan.arrivals(t), plan.departures(t + 1))]
        checks["gluing"] = not bad_glue
        if bad_glue:
            msgs["gluing"] = f"arrivals at t differ from departures at t+1 for t in {bad_glue[:5]}"
        over = [t for t in range(0, T + 1) if q[t].max(initial=0) > 1]
        checks["capacity"] = not over
        if over:
            msgs["capacity"] = f"a vertex holds more than one robot at times {over[:5]}"
        unreached = [j for j in inst.targets if q[T][j] < 1]
        checks["targets_reached"] = not unreached
        if unreached:
            msgs["targets_reached"] = f"targets left empty at t=T: {unreached[:10]}"

        index = inst.edge_index
        swaps = []
        cycles = []
        mv = plan.move_mask
        for t in range(1, T + 1):
            used = np.flatnonzero((flows[t - 1] > 0) & mv)
            s, d = inst.src[used], inst.dst[used]
            for e in used.tolist():
                i, j = int(inst.src[e]), int(inst.dst[e])
                r = index.get((j, i))
                if i < j and r is not None and flows[t - 1, r] > 0:
                    swaps.append((t, i, j))
            cyc = _slice_cycle(s, d)
            if cyc is not None:
                cycles.append((t, cyc))
        checks["swap_free"] = not swaps
        if swaps:
            msgs["swap_free"] = f"swaps (t, i, j): {swaps[:5]}"
        checks["cycle_free"] = not cycles
        if cycles:
            msgs["cycle_free"] = f"slice cycles (t, vertices): {cycles[:3]}"

    hard = ["integrality", "support", "boundary", "gluing", "capacity", "targets_reached"]
    try:
        ordered, _ = _cost_ordering(inst, max(T, 1))
    except Exception:
        ordered = False
    if ordered:
        hard += ["swap_free", "cycle_free"]
    return VerificationReport(checks, tuple(hard), msgs, metrics(inst, plan))
