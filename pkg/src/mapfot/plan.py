"""Integral transport plans and their JSON file format."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from scipy.sparse import csr_matrix

from .errors import DimensionMismatch, ParseError
from .instance import Instance


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Edge flows ``flows[t-1, e]`` in ``{0, 1}`` for slices ``t = 1..T``.

    Column ``e`` refers to ``instance.edges[e]``; a slice is therefore a sparse
    K x K matrix supported on the edge set.
    """

    flows: np.ndarray
    n_vertices: int
    src: np.ndarray
    dst: np.ndarray

    @classmethod
    def for_instance(cls, inst: Instance, flows) -> TransportPlan:
        flows = np.asarray(flows)
        if flows.ndim != 2 or flows.shape[1] != inst.n_edges:
            raise DimensionMismatch(f"flows of shape {flows.shape} do not match {inst.n_edges} edges")
        return cls(flows.astype(np.int64), inst.n_vertices, inst.src, inst.dst)

    @classmethod
    def empty(cls, inst: Instance, horizon: int) -> TransportPlan:
        return cls.for_instance(inst, np.zeros((horizon, inst.n_edges), dtype=np.int64))

    def __eq__(self, other) -> bool:
        if not isinstance(other, TransportPlan):
            return NotImplemented
        return (self.n_vertices == other.n_vertices and self.flows.shape == other.flows.shape
                and bool(np.array_equal(self.flows, other.flows))
                and bool(np.array_equal(self.src, other.src)) and bool(np.array_equal(self.dst, other.dst)))

    @property
    def horizon(self) -> int:
        return self.flows.shape[0]

    def slice_matrix(self, t: int) -> csr_matrix:
        """Pi_t as a K x K sparse matrix (``t`` is 1-based)."""
        K = self.n_vertices
        return csr_matrix((self.flows[t - 1], (self.src, self.dst)), shape=(K, K))

    def departures(self, t: int) -> np.ndarray:
        """Row sums of Pi_t, i.e. occupancy at time t-1."""
        return np.bincount(self.src, weights=self.flows[t - 1], minlength=self.n_vertices).astype(np.int64)

    def arrivals(self, t: int) -> np.ndarray:
        """Column sums of Pi_t, i.e. occupancy at time t."""
        return np.bincount(self.dst, weights=self.flows[t - 1], minlength=self.n_vertices).astype(np.int64)

    def marginals(self) -> np.ndarray:
        """Occupancies q_0..q_T as a (T+1, K) array; q_0 is read off Pi_1."""
        T = self.horizon
        q = np.zeros((T + 1, self.n_vertices), dtype=np.int64)
        if T == 0:
            return q
        q[0] = self.departures(1)
        for t in range(1, T + 1):
            q[t] = self.arrivals(t)
        return q

    def arcs(self, t: int) -> list[tuple[int, int]]:
        """Unit flows of slice t as (i, j) pairs, waits included, in edge order."""
        idx = np.flatnonzero(self.flows[t - 1])
        out = []
        for e in idx:
            out.extend([(int(self.src[e]), int(self.dst[e]))] * int(self.flows[t - 1, e]))
        return out

    @property
    def move_mask(self) -> np.ndarray:
        return self.src != self.dst

    @property
    def makespan(self) -> int:
        """Largest t at which some non-wait arc carries flow (0 if none)."""
        moving = np.flatnonzero(self.flows[:, self.move_mask].sum(axis=1) > 0)
        return int(moving[-1]) + 1 if moving.size else 0

    @property
    def moves(self) -> int:
        return int(self.flows[:, self.move_mask].sum())

    def trajectories(self) -> list[list[int]]:
        """Split the anonymous flow into per-robot vertex sequences (descriptive only)."""
        T = self.horizon
        if T == 0:
            return []
        starts = [int(v) for v in np.flatnonzero(self.departures(1)) for _ in range(int(self.departures(1)[v]))]
        paths = [[s] for s in starts]
        for t in range(1, T + 1):
            pool: dict[int, list[int]] = {}
            for i, j in self.arcs(t):
                pool.setdefault(i, []).append(j)
            for p in paths:
                nxt = pool.get(p[-1])
                p.append(nxt.pop(0) if nxt else p[-1])
        return paths


def plan_to_dict(plan: TransportPlan, cost: Any = None, makespan: int | None = None) -> dict[str, Any]:
    return {
        "horizon": plan.horizon,
        "slices": [{"t": t, "moves": [list(a) for a in plan.arcs(t)]} for t in range(1, plan.horizon + 1)],
        "cost": cost,
        "makespan": plan.makespan if makespan is None else makespan,
    }


def plan_from_dict(inst: Instance, d: dict[str, Any]) -> TransportPlan:
    for name in ("horizon", "slices"):
        if name not in d:
            raise ParseError("missing required field", field=name)
    T = int(d["horizon"])
    flows = np.zeros((T, inst.n_edges), dtype=np.int64)
    index = inst.edge_index
    for s in d["slices"]:
        t = int(s["t"])
        if not 1 <= t <= T:
            raise DimensionMismatch(f"slice t={t} outside 1..{T}")
        for i, j in s["moves"]:
            e = index.get((int(i), int(j)))
            if e is None:
                raise DimensionMismatch(f"arc {i}->{j} at t={t} is not an instance edge")
            flows[t - 1, e] += 1
    return TransportPlan.for_instance(inst, flows)


def save_plan(plan: TransportPlan, path: str | Path, cost: Any = None) -> None:
    Path(path).write_text(json.dumps(plan_to_dict(plan, cost), separators=(",", ":")) + "\n", encoding="utf-8")


def load_plan(inst: Instance, path: str | Path) -> TransportPlan:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    return plan_from_dict(inst, d)
