"""Min-cost flow by successive shortest augmenting paths with node potentials.

All arithmetic is on integers, so the returned flow is integral by
construction and the objective is exact.  Two interchangeable kernels share
one algorithm and one tie-breaking rule:

* a numba-compiled kernel for ``int64`` costs (the normal path), and
* a pure-Python kernel for arbitrary-precision integer costs (the
  exponential makespan model, whose costs outgrow 64 bits).

Each augmentation runs Dijkstra on reduced costs from a super source that
feeds every supply node.  The heap orders entries by ``(distance, node)`` and
arcs are scanned in index order, with a label only replaced on strict
improvement; given the arc order fixed by :mod:`mapfot.timeexp` the chosen
optimum is therefore reproducible.  Dijkstra stops when the super sink is
settled and potentials are updated with distances truncated at the sink
distance, which keeps every residual reduced cost nonnegative.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numba
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow

from .errors import Infeasible

_INF = np.iinfo(np.int64).max // 4


@dataclass
class FlowResult:
    flow: np.ndarray
    cost: int
    augmentations: int
    heap_pops: int


def _residual(n, tail, head, cap, supply):
    """Arrays of the residual network including super source ``n`` / sink ``n+1``."""
    pos = np.flatnonzero(supply > 0)
    neg = np.flatnonzero(supply < 0)
    tails = np.concatenate([tail, np.full(pos.size, n), neg]).astype(np.int64)
    heads = np.concatenate([head, pos, np.full(neg.size, n + 1)]).astype(np.int64)
    caps = np.concatenate([cap, supply[pos], -supply[neg]]).astype(np.int64)
    m = tails.size
    r_from = np.empty(2 * m, dtype=np.int64)
    r_to = np.empty(2 * m, dtype=np.int64)
    r_from[0::2], r_to[0::2] = tails, heads
    r_from[1::2], r_to[1::2] = heads, tails
    r_cap = np.zeros(2 * m, dtype=np.int64)
    r_cap[0::2] = caps
    order = np.argsort(r_from, kind="stable")
    indptr = np.zeros(n + 3, dtype=np.int64)
    np.cumsum(np.bincount(r_from, minlength=n + 2), out=indptr[1:])
    return m, r_to, r_cap, order, indptr, int(supply[pos].sum())


@numba.njit(cache=True)
def _heap_push(keys, nodes, size, k, v):
    i = size
    keys[i] = k
    nodes[i] = v
    while i > 0:
        p = (i - 1) // 2
        if keys[p] > keys[i] or (keys[p] == keys[i] and nodes[p] > nodes[i]):
            keys[p], keys[i] = keys[i], keys[p]
            nodes[p], nodes[i] = nodes[i], nodes[p]
            i = p
        else:
            break
    return size + 1


@numba.njit(cache=True)
def _heap_pop(keys, nodes, size):
    k, v = keys[0], nodes[0]
    size -= 1
    keys[0] = keys[size]
    nodes[0] = nodes[size]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= size:
            break
        c = left
        right = left + 1
        if right < size and (keys[right] < keys[left] or (keys[right] == keys[left] and nodes[right] < nodes[left])):
            c = right
        if keys[c] < keys[i] or (keys[c] == keys[i] and nodes[c] < nodes[i]):
            keys[c], keys[i] = keys[i], keys[c]
            nodes[c], nodes[i] = nodes[i], nodes[c]
            i = c
        else:
            break
    return k, v, size


@numba.njit(cache=True)
def _ssp_kernel(n_total, r_to, r_cap, r_cost, order, indptr, source, sink, demand):
    n_res = r_to.size
    pot = np.zeros(n_total, dtype=np.int64)
    dist = np.empty(n_total, dtype=np.int64)
    pred = np.empty(n_total, dtype=np.int64)
    done = np.empty(n_total, dtype=np.bool_)
    keys = np.empty(n_res + n_total + 1, dtype=np.int64)
    nodes = np.empty(n_res + n_total + 1, dtype=np.int64)
    inf = np.iinfo(np.int64).max // 4
    pushed = 0
    augmentations = 0
    pops = 0
    while pushed < demand:
        dist[:] = inf
        done[:] = False
        pred[:] = -1
        dist[source] = 0
        size = _heap_push(keys, nodes, 0, 0, source)
        while size > 0:
            d, u, size = _heap_pop(keys, nodes, size)
            pops += 1
            if done[u] or d > dist[u]:
                continue
            done[u] = True
            if u == sink:
                break
            pu = pot[u]
            for p in range(indptr[u], indptr[u + 1]):
                r = order[p]
                if r_cap[r] > 0:
                    v = r_to[r]
                    if done[v]:
                        continue
                    nd = d + r_cost[r] + pu - pot[v]
                    if nd < dist[v]:
                        dist[v] = nd
                        pred[v] = r
                        size = _heap_push(keys, nodes, size, nd, v)
        if not done[sink]:
            return pushed, augmentations, pops
        dz = dist[sink]
        for v in range(n_total):
            if done[v]:
                pot[v] += dist[v]
            else:
                pot[v] += dz
        # bottleneck along the path
        b = demand - pushed
        v = sink
        while v != source:
            r = pred[v]
            if r_cap[r] < b:
                b = r_cap[r]
            v = r_to[r ^ 1]
        v = sink
        while v != source:
            r = pred[v]
            r_cap[r] -= b
            r_cap[r ^ 1] += b
            v = r_to[r ^ 1]
        pushed += b
        augmentations += 1
    return pushed, augmentations, pops


def _ssp_python(n_total, r_to, r_cap, r_cost, order, indptr, source, sink, demand):
    """Same algorithm as the numba kernel, on Python integers."""
    r_to = r_to.tolist()
    cap = r_cap.tolist()
    cost = list(r_cost)
    adj = [order[indptr[u]:indptr[u + 1]].tolist() for u in range(n_total)]
    pot = [0] * n_total
    pushed = augmentations = pops = 0
    while pushed < demand:
        dist: list = [None] * n_total
        pred = [-1] * n_total
        done = [False] * n_total
        dist[source] = 0
        heap = [(0, source)]
        while heap:
            d, u = heapq.heappop(heap)
            pops += 1
            if done[u] or d > dist[u]:
                continue
            done[u] = True
            if u == sink:
                break
            pu = pot[u]
            for r in adj[u]:
                if cap[r] > 0:
                    v = r_to[r]
                    if done[v]:
                        continue
                    nd = d + cost[r] + pu - pot[v]
                    if dist[v] is None or nd < dist[v]:
                        dist[v] = nd
                        pred[v] = r
                        heapq.heappush(heap, (nd, v))
        if not done[sink]:
            break
        dz = dist[sink]
        for v in range(n_total):
            pot[v] += dist[v] if done[v] else dz
        b = demand - pushed
        v = sink
        while v != source:
            r = pred[v]
            b = min(b, cap[r])
            v = r_to[r ^ 1]
        v = sink
        while v != source:
            r = pred[v]
            cap[r] -= b
            cap[r ^ 1] += b
            v = r_to[r ^ 1]
        pushed += b
        augmentations += 1
    r_cap[:] = np.asarray(cap, dtype=np.int64)
    return pushed, augmentations, pops


def max_flow_value(n: int, tail, head, cap, supply) -> int:
    """Maximum routable supply, ignoring costs (feasibility pre-pass)."""
    pos = np.flatnonzero(supply > 0)
    neg = np.flatnonzero(supply < 0)
    if pos.size == 0:
        return 0
    tails = np.concatenate([tail, np.full(pos.size, n), neg])
    heads = np.concatenate([head, pos, np.full(neg.size, n + 1)])
    caps = np.concatenate([cap, supply[pos], -supply[neg]]).astype(np.int32)
    g = csr_matrix((caps, (tails, heads)), shape=(n + 2, n + 2))
    return int(maximum_flow(g, n, n + 1, method="dinic").flow_value)


def min_cost_flow(n: int, tail, head, cap, cost, supply, *, backend: str = "auto",
                  check_feasible: bool = True) -> FlowResult:
    """Route ``supply`` (positive = source, negative = sink) at minimum cost.

    ``cost`` must be nonnegative.  ``backend`` is ``"numba"``, ``"python"`` or
    ``"auto"`` (python for object-dtype costs, numba otherwise).

    Raises :class:`Infeasible` if the supply cannot all be routed.
    """
    tail = np.asarray(tail, dtype=np.int64)
    head = np.asarray(head, dtype=np.int64)
    cap = np.asarray(cap, dtype=np.int64)
    supply = np.asarray(supply, dtype=np.int64)
    if supply.sum() != 0:
        raise Infeasible(f"supply and demand differ by {int(supply.sum())}")
    exact = np.asarray(cost).dtype == object
    if backend == "auto":
        backend = "python" if exact else "numba"
    if any(c < 0 for c in np.asarray(cost).tolist()) if exact else bool(np.any(np.asarray(cost) < 0)):
        raise ValueError("arc costs must be nonnegative")
    demand = int(supply[supply > 0].sum())
    if check_feasible and demand and max_flow_value(n, tail, head, cap, supply) < demand:
        raise Infeasible(f"at most {max_flow_value(n, tail, head, cap, supply)} of {demand} units can be routed")
    m, r_to, r_cap, order, indptr, demand = _residual(n, tail, head, cap, supply)
    n_extra = m - tail.size
    if exact:
        c = [0] * (2 * m)
        for a, ca in enumerate(np.asarray(cost).tolist()):
            c[2 * a] = ca
            c[2 * a + 1] = -ca
        r_cost = c
    else:
        r_cost = np.zeros(2 * m, dtype=np.int64)
        base = np.concatenate([np.asarray(cost, dtype=np.int64), np.zeros(n_extra, dtype=np.int64)])
        r_cost[0::2] = base
        r_cost[1::2] = -base
    if backend == "numba":
        if exact:
            raise ValueError("the numba backend needs int64 costs")
        pushed, aug, pops = _ssp_kernel(n + 2, r_to, r_cap, r_cost, order, indptr, n, n + 1, demand)
    elif backend == "python":
        pushed, aug, pops = _ssp_python(n + 2, r_to, r_cap, r_cost, order, indptr, n, n + 1, demand)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    if pushed < demand:
        raise Infeasible(f"only {pushed} of {demand} units can be routed")
    flow = r_cap[1:2 * tail.size:2].copy()
    if exact:
        total = sum(int(f) * c for f, c in zip(flow.tolist(), np.asarray(cost).tolist()) if f)
    else:
        total = int(np.dot(flow, np.asarray(cost, dtype=np.int64)))
    return FlowResult(flow, total, aug, pops)
