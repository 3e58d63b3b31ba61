"""Node-split time-expanded flow network.

Layer 0 and layer T hold one plain node per vertex.  Every intermediate layer
``t = 1..T-1`` holds an in-node and an out-node per vertex joined by a
capacity-1 internal arc; that arc is what enforces "at most one robot per
vertex per time".  Movement arc ``(i, t-1) -> (j, t)`` exists for every edge
``i -> j`` and leaves the out-node of ``(i, t-1)`` and enters the in-node of
``(j, t)``.

Node numbering (``K`` vertices)::

    layer 0          : i
    layer t, in-node : K + 2K(t-1) + i          (1 <= t <= T-1)
    layer t, out-node: K + 2K(t-1) + K + i
    layer T          : K + 2K(T-1) + i

Movement arcs come first, ordered by ``(t, i, j)``; internal arcs follow,
ordered by ``(t, i)``.  The order is part of the contract: the flow solver
breaks ties by it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConservationViolation, DimensionMismatch, HorizonZeroWithUnreachedTargets, NonIntegralFlow
from .instance import Instance
from .plan import TransportPlan


@dataclass(frozen=True, eq=False)
class TimeExpandedGraph:
    n_vertices: int
    horizon: int
    n_nodes: int
    tail: np.ndarray
    head: np.ndarray
    cost: np.ndarray
    cap: np.ndarray
    supply: np.ndarray
    arc_slice: np.ndarray  # 1..T for movement arcs, 0 for internal arcs
    arc_edge: np.ndarray  # instance edge index, -1 for internal arcs
    n_edges: int

    @property
    def n_arcs(self) -> int:
        return self.tail.size

    @property
    def movement(self) -> np.ndarray:
        return self.arc_edge >= 0

    @property
    def n_internal(self) -> int:
        return int((self.arc_edge < 0).sum())

    def node_in(self, v: int, t: int) -> int:
        """Node that arcs arriving at (v, t) enter."""
        K, T = self.n_vertices, self.horizon
        if t == 0:
            return v
        if t == T:
            return K + 2 * K * (T - 1) + v
        return K + 2 * K * (t - 1) + v

    def node_out(self, v: int, t: int) -> int:
        """Node that arcs leaving (v, t) depart from."""
        K, T = self.n_vertices, self.horizon
        if t == 0:
            return v
        if t == T:
            return K + 2 * K * (T - 1) + v
        return K + 2 * K * (t - 1) + K + v

    def dump(self) -> str:
        """Edge-list text: one ``tail head cost cap slice edge`` line per arc."""
        lines = [f"# nodes {self.n_nodes} arcs {self.n_arcs} horizon {self.horizon}"]
        for a in range(self.n_arcs):
            lines.append(f"{self.tail[a]} {self.head[a]} {self.cost[a]} {self.cap[a]} "
                         f"{self.arc_slice[a]} {self.arc_edge[a]}")
        nz = np.flatnonzero(self.supply)
        lines.extend(f"supply {v} {self.supply[v]}" for v in nz)
        return "\n".join(lines) + "\n"


def build(inst: Instance, horizon: int | None = None, mask: np.ndarray | None = None,
          costs: np.ndarray | None = None) -> TimeExpandedGraph:
    """Build the network for ``inst`` over ``horizon`` slices.

    ``mask`` (shape ``(T, E)``, boolean) drops movement arcs; ``costs`` (same
    shape) overrides the instance cost table.  Both default to the full
    instance.
    """
    T = inst.horizon if horizon is None else int(horizon)
    K, E = inst.n_vertices, inst.n_edges
    if T < 0:
        raise ValueError("horizon must be nonnegative")
    if T == 0:
        if set(inst.robots) != set(inst.targets):
            raise HorizonZeroWithUnreachedTargets("T=0 but robots do not already occupy the targets")
        z = np.zeros(0, dtype=np.int64)
        return TimeExpandedGraph(K, 0, K, z, z, z, z, np.zeros(K, dtype=np.int64), z, z, E)
    if costs is None:
        costs = inst.cost_table(T).values
    if costs.shape != (T, E):
        raise DimensionMismatch(f"cost overlay of shape {costs.shape}, expected {(T, E)}")
    if mask is not None and mask.shape != (T, E):
        raise DimensionMismatch(f"mask of shape {mask.shape}, expected {(T, E)}")

    n_nodes = 2 * K * T
    t_idx = np.repeat(np.arange(1, T + 1), E)
    e_idx = np.tile(np.arange(E), T)
    src_v = inst.src[e_idx]
    dst_v = inst.dst[e_idx]
    # tail: out-node of (i, t-1)
    tail = np.where(t_idx - 1 == 0, src_v, K + 2 * K * (t_idx - 2) + K + src_v)
    # head: in-node of (j, t)
    head = np.where(t_idx == T, K + 2 * K * (T - 1) + dst_v, K + 2 * K * (t_idx - 1) + dst_v)
    mcost = costs.reshape(-1)
    if mask is not None:
        keep = mask.reshape(-1).astype(bool)
        tail, head, t_idx, e_idx, mcost = tail[keep], head[keep], t_idx[keep], e_idx[keep], mcost[keep]

    n_int = K * (T - 1)
    it = np.repeat(np.arange(1, T), K)
    iv = np.tile(np.arange(K), T - 1)
    itail = K + 2 * K * (it - 1) + iv
    ihead = itail + K

    dtype = object if costs.dtype == object else np.int64
    icost = np.zeros(n_int, dtype=dtype)
    if dtype is object:
        icost[:] = 0
    supply = np.zeros(n_nodes, dtype=np.int64)
    supply[list(inst.robots)] += 1
    supply[[K + 2 * K * (T - 1) + j for j in inst.targets]] -= 1
    return TimeExpandedGraph(
        n_vertices=K,
        horizon=T,
        n_nodes=n_nodes,
        tail=np.concatenate([tail, itail]).astype(np.int64),
        head=np.concatenate([head, ihead]).astype(np.int64),
        cost=np.concatenate([np.asarray(mcost, dtype=dtype), icost]),
        cap=np.ones(tail.size + n_int, dtype=np.int64),
        supply=supply,
        arc_slice=np.concatenate([t_idx, np.zeros(n_int, dtype=np.int64)]).astype(np.int64),
        arc_edge=np.concatenate([e_idx, -np.ones(n_int, dtype=np.int64)]).astype(np.int64),
        n_edges=E,
    )


def check_flow(teg: TimeExpandedGraph, flow) -> np.ndarray:
    """Return ``flow`` as int64 after checking integrality, capacity and balance."""
    f = np.asarray(flow)
    if f.shape != (teg.n_arcs,):
        raise DimensionMismatch(f"flow of shape {f.shape}, network has {teg.n_arcs} arcs")
    if f.dtype.kind == "f":
        if not np.all(f == np.round(f)):
            raise NonIntegralFlow("flow has fractional entries")
    fi = f.astype(np.int64)
    if np.any(fi < 0) or np.any(fi > teg.cap):
        raise ConservationViolation("flow outside [0, capacity]")
    net = np.bincount(teg.tail, weights=fi, minlength=teg.n_nodes) - np.bincount(
        teg.head, weights=fi, minlength=teg.n_nodes)
    if not np.array_equal(net.astype(np.int64), teg.supply):
        bad = np.flatnonzero(net.astype(np.int64) != teg.supply)
        raise ConservationViolation(f"node balance violated at {bad[:5].tolist()}")
    return fi


def flow_to_plan(teg: TimeExpandedGraph, inst: Instance, flow) -> TransportPlan:
    """Movement-arc flows become plan entries; internal arcs are dropped."""
    fi = check_flow(teg, flow)
    flows = np.zeros((teg.horizon, teg.n_edges), dtype=np.int64)
    mv = teg.movement
    flows[teg.arc_slice[mv] - 1, teg.arc_edge[mv]] = fi[mv]
    return TransportPlan.for_instance(inst, flows)


def plan_to_flow(teg: TimeExpandedGraph, plan: TransportPlan) -> np.ndarray:
    """Inverse of :func:`flow_to_plan`; internal arcs carry what passes each vertex."""
    if plan.horizon != teg.horizon or plan.flows.shape[1] != teg.n_edges:
        raise DimensionMismatch(
            f"plan {plan.flows.shape} does not fit network with T={teg.horizon}, E={teg.n_edges}")
    f = np.zeros(teg.n_arcs, dtype=np.int64)
    mv = np.flatnonzero(teg.movement)
    f[mv] = plan.flows[teg.arc_slice[mv] - 1, teg.arc_edge[mv]]
    rest = plan.flows.copy()
    rest[teg.arc_slice[mv] - 1, teg.arc_edge[mv]] = 0
    if rest.any():
        raise DimensionMismatch("plan uses arcs that are absent from the network")
    internal = np.flatnonzero(~teg.movement)
    if internal.size:
        K = teg.n_vertices
        occ = np.zeros((teg.horizon + 1, K), dtype=np.int64)
        for t in range(1, teg.horizon):
            occ[t] = plan.arrivals(t)
        t_of = (teg.tail[internal] - K) // (2 * K) + 1
        v_of = (teg.tail[internal] - K) % (2 * K)
        f[internal] = occ[t_of, v_of]
    return f
