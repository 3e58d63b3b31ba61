"""MAPF instances: graph, robots, targets, horizon and cost model.

An :class:`Instance` is immutable.  Vertex ids are integers ``0..K-1`` (row-major
for grids).  The edge list holds directed pairs ``(i, j)`` sorted
lexicographically and includes a self-loop ``(i, i)`` for every non-obstacle
vertex; obstacles carry no edges at all.  Non-edges are simply absent, there is
no infinite-cost sentinel anywhere.

Costs are evaluated through :meth:`Instance.cost_table`, which returns exact
integers together with the denominator they are scaled by, so that the strict
inequalities the solvers rely on survive arithmetic unchanged.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Any, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import CapacityExceeded, ParseError, VersionMismatch

SCHEMA_VERSION = 1
DEFAULT_DENOMINATOR = 10**6

Number = Union[int, float, Fraction]


def _frac(x: Number | str) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        # decimal reading: 0.1 means 1/10, not the nearest binary fraction
        return Fraction(repr(x))
    return Fraction(x)


def _frac_str(x: Fraction) -> str:
    return str(x)


def _round_scaled(values: np.ndarray, denominator: int) -> np.ndarray:
    return np.rint(np.asarray(values, dtype=float) * denominator).astype(np.int64)


@dataclass(frozen=True)
class CostTable:
    """Integer edge costs for slices ``t = 1..T`` (row ``t-1``).

    ``values[t-1, e] / scale`` is the real cost of traversing edge ``e`` from
    time ``t-1`` to ``t``.  ``values`` is ``int64`` except for the exponential
    makespan model, where it is an object array of Python integers.
    """

    values: np.ndarray
    scale: int

    @property
    def exact(self) -> bool:
        return self.values.dtype == object


# ---------------------------------------------------------------------------
# cost models


@dataclass(frozen=True)
class Uniform:
    """One move cost, one non-target wait cost, one target wait cost."""

    move: Fraction = Fraction(1)
    wait_nontarget: Fraction = Fraction(1, 2)
    wait_target: Fraction = Fraction(0)

    variant = "uniform"
    time_dependent = False

    def __post_init__(self):
        for name in ("move", "wait_nontarget", "wait_target"):
            object.__setattr__(self, name, _frac(getattr(self, name)))

    def _scale(self) -> int:
        scale = math.lcm(self.move.denominator, self.wait_nontarget.denominator,
                         self.wait_target.denominator)
        return scale

    def table(self, inst: Instance, horizon: int) -> CostTable:
        scale = self._scale()
        row = np.full(inst.n_edges, int(self.move * scale), dtype=np.int64)
        row[inst.loop_mask] = int(self.wait_nontarget * scale)
        row[inst.loop_mask & inst.target_mask[inst.src]] = int(self.wait_target * scale)
        return CostTable(np.tile(row, (horizon, 1)), scale)

    def params(self) -> dict[str, Any]:
        return {"move": _frac_str(self.move), "wait_nontarget": _frac_str(self.wait_nontarget),
                "wait_target": _frac_str(self.wait_target)}


@dataclass(frozen=True)
class Metric:
    """Move cost equals a per-edge length ``d(i, j)``; waits as in :class:`Uniform`.

    ``lengths`` is a tuple of ``(i, j, d)`` triples covering every non-loop edge.
    """

    lengths: tuple[tuple[int, int, float], ...]
    wait_nontarget: float = 0.5
    wait_target: float = 0.0
    denominator: int = DEFAULT_DENOMINATOR

    variant = "metric"
    time_dependent = False

    def __post_init__(self):
        object.__setattr__(self, "lengths",
                           tuple((int(i), int(j), float(d)) for i, j, d in self.lengths))

    def table(self, inst: Instance, horizon: int) -> CostTable:
        d = {(i, j): length for i, j, length in self.lengths}
        row = np.empty(inst.n_edges, dtype=float)
        for e, (i, j) in enumerate(inst.edges):
            if i == j:
                row[e] = self.wait_target if inst.target_mask[i] else self.wait_nontarget
            else:
                try:
                    row[e] = d[(i, j)]
                except KeyError:
                    raise ParseError(f"no length for edge {i}->{j}", field="cost_model.params.lengths") from None
        return CostTable(np.tile(_round_scaled(row, self.denominator), (horizon, 1)), self.denominator)

    def params(self) -> dict[str, Any]:
        return {"lengths": [list(x) for x in self.lengths], "wait_nontarget": self.wait_nontarget,
                "wait_target": self.wait_target, "denominator": self.denominator}


@dataclass(frozen=True)
class Tabulated:
    """Explicit per-slice, per-edge costs.

    ``table[t-1][e]`` is the cost of edge ``e`` in slice ``t``.  A table with a
    single row is time-invariant and broadcasts to any horizon.
    """

    table_rows: tuple[tuple[float, ...], ...]
    denominator: int = DEFAULT_DENOMINATOR

    variant = "tabulated"

    def __post_init__(self):
        object.__setattr__(self, "table_rows", tuple(tuple(float(c) for c in r) for r in self.table_rows))

    @property
    def time_dependent(self) -> bool:
        return len(self.table_rows) > 1

    def table(self, inst: Instance, horizon: int) -> CostTable:
        arr = np.asarray(self.table_rows, dtype=float).reshape(len(self.table_rows), -1)
        if arr.shape[1] != inst.n_edges:
            raise ParseError(f"table has {arr.shape[1]} columns, instance has {inst.n_edges} edges",
                             field="cost_model.params.table")
        if arr.shape[0] == 1:
            arr = np.repeat(arr, horizon, axis=0)
        elif arr.shape[0] < horizon:
            raise ParseError(f"table covers {arr.shape[0]} slices, horizon is {horizon}",
                             field="cost_model.params.table")
        return CostTable(_round_scaled(arr[:horizon], self.denominator), self.denominator)

    def params(self) -> dict[str, Any]:
        return {"table": [list(r) for r in self.table_rows], "denominator": self.denominator}


@dataclass(frozen=True)
class NonUniformRandom:
    """Random terrain: every cell draws an arrival cost and a wait cost.

    Entering cell ``j`` from a neighbour costs ``arrival[j]``; waiting at a
    non-target ``i`` costs ``wait[i]``; waiting at a target is free.
    """

    seed: int
    arrival_range: tuple[float, float] = (0.6, 1.0)
    wait_range: tuple[float, float] = (0.1, 0.5)
    denominator: int = DEFAULT_DENOMINATOR

    variant = "nonuniform_random"
    time_dependent = False

    def draws(self, n_vertices: int) -> tuple[np.ndarray, np.ndarray]:
        rng = np.random.default_rng(self.seed)
        arrival = rng.uniform(self.arrival_range[0], self.arrival_range[1], n_vertices)
        wait = rng.uniform(self.wait_range[0], self.wait_range[1], n_vertices)
        return arrival, wait

    def table(self, inst: Instance, horizon: int) -> CostTable:
        arrival, wait = self.draws(inst.n_vertices)
        row = arrival[inst.dst].copy()
        loops = inst.loop_mask
        row[loops] = wait[inst.src[loops]]
        row[loops & inst.target_mask[inst.src]] = 0.0
        return CostTable(np.tile(_round_scaled(row, self.denominator), (horizon, 1)), self.denominator)

    def params(self) -> dict[str, Any]:
        return {"seed": self.seed, "arrival_range": list(self.arrival_range),
                "wait_range": list(self.wait_range), "denominator": self.denominator}


@dataclass(frozen=True)
class ExponentialMakespan:
    """Time-separating costs ``c_t = B**t * base``; ``base`` is read at slice 1.

    With ``base=None`` the instance-independent default :class:`Uniform` is
    used.  ``B=None`` selects the smallest integer with
    ``(B - 1) * min_move > sum(base)`` on the scaled integer base costs.
    Costs are Python integers, so they never overflow.
    """

    base: Any = None
    B: int | None = None

    variant = "exponential_makespan"
    time_dependent = True

    def __post_init__(self):
        if self.base is None:
            object.__setattr__(self, "base", Uniform())

    def base_model(self):
        return self.base

    def base_row(self, inst: Instance) -> tuple[list[int], int]:
        tab = self.base_model().table(inst, 1)
        return [int(c) for c in tab.values[0]], tab.scale

    def resolve_B(self, inst: Instance) -> int:
        row, _ = self.base_row(inst)
        if self.B is not None:
            return int(self.B)
        moves = [c for c, loop in zip(row, inst.loop_mask) if not loop]
        if not moves:
            return 2
        return sum(row) // min(moves) + 2

    def table(self, inst: Instance, horizon: int) -> CostTable:
        row, scale = self.base_row(inst)
        B = self.resolve_B(inst)
        out = np.empty((horizon, inst.n_edges), dtype=object)
        for t in range(1, horizon + 1):
            f = B**t
            out[t - 1, :] = [f * c for c in row]
        return CostTable(out, scale)

    def params(self) -> dict[str, Any]:
        base = self.base_model()
        return {"base": {"variant": base.variant, "params": base.params()}, "B": self.B}


CostModel = Union[Uniform, Metric, Tabulated, NonUniformRandom, ExponentialMakespan]

_VARIANTS = {cls.variant: cls for cls in (Uniform, Metric, Tabulated, NonUniformRandom, ExponentialMakespan)}


def cost_model_to_dict(model: CostModel) -> dict[str, Any]:
    return {"variant": model.variant, "params": model.params()}


def cost_model_from_dict(d: dict[str, Any], where: str = "cost_model") -> CostModel:
    if not isinstance(d, dict):
        raise ParseError("cost model must be an object", field=where)
    variant = d.get("variant")
    if variant not in _VARIANTS:
        raise ParseError(f"unknown cost variant {variant!r}", field=f"{where}.variant")
    p = d.get("params", {})
    try:
        if variant == "uniform":
            return Uniform(_frac(p["move"]), _frac(p["wait_nontarget"]), _frac(p["wait_target"]))
        if variant == "metric":
            return Metric(tuple(tuple(x) for x in p["lengths"]), float(p["wait_nontarget"]),
                          float(p["wait_target"]), int(p.get("denominator", DEFAULT_DENOMINATOR)))
        if variant == "tabulated":
            return Tabulated(tuple(tuple(r) for r in p["table"]), int(p.get("denominator", DEFAULT_DENOMINATOR)))
        if variant == "nonuniform_random":
            return NonUniformRandom(int(p["seed"]), tuple(p["arrival_range"]), tuple(p["wait_range"]),
                                    int(p.get("denominator", DEFAULT_DENOMINATOR)))
        base = cost_model_from_dict(p["base"], f"{where}.params.base") if p.get("base") else None
        return ExponentialMakespan(base, p.get("B"))
    except KeyError as exc:
        raise ParseError(f"missing cost parameter {exc.args[0]!r}", field=f"{where}.params.{exc.args[0]}") from None
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad cost parameters: {exc}", field=f"{where}.params") from None


# ---------------------------------------------------------------------------
# instance


@dataclass(frozen=True)
class Instance:
    n_vertices: int
    edges: tuple[tuple[int, int], ...]
    obstacles: tuple[int, ...]
    robots: tuple[int, ...]
    targets: tuple[int, ...]
    horizon: int
    costs: CostModel = field(default_factory=Uniform)
    width: int | None = None
    height: int | None = None
    seed: int | None = None

    def __post_init__(self):
        K = int(self.n_vertices)
        edges = tuple(sorted({(int(i), int(j)) for i, j in self.edges}))
        for i, j in edges:
            if not (0 <= i < K and 0 <= j < K):
                raise ParseError(f"edge {i}->{j} references a vertex outside 0..{K - 1}", field="edges")
        for name in ("obstacles", "robots", "targets"):
            vals = tuple(sorted(int(v) for v in getattr(self, name)))
            if any(not 0 <= v < K for v in vals):
                raise ParseError(f"{name} reference a vertex outside 0..{K - 1}", field=name)
            object.__setattr__(self, name, vals)
        if self.horizon < 0:
            raise ParseError("horizon must be nonnegative", field="horizon")
        object.__setattr__(self, "n_vertices", K)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "horizon", int(self.horizon))

    # -- array views (cached; the instance itself never changes)

    @cached_property
    def src(self) -> np.ndarray:
        return np.fromiter((i for i, _ in self.edges), dtype=np.int64, count=len(self.edges))

    @cached_property
    def dst(self) -> np.ndarray:
        return np.fromiter((j for _, j in self.edges), dtype=np.int64, count=len(self.edges))

    @cached_property
    def loop_mask(self) -> np.ndarray:
        return self.src == self.dst

    @cached_property
    def target_mask(self) -> np.ndarray:
        m = np.zeros(self.n_vertices, dtype=bool)
        m[list(self.targets)] = True
        return m

    @cached_property
    def robot_mask(self) -> np.ndarray:
        m = np.zeros(self.n_vertices, dtype=bool)
        m[list(self.robots)] = True
        return m

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {e: k for k, e in enumerate(self.edges)}

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_robots(self) -> int:
        return len(self.robots)

    @cached_property
    def mu(self) -> np.ndarray:
        return self.robot_mask.astype(float)

    @cached_property
    def nu(self) -> np.ndarray:
        return self.target_mask.astype(float)

    @cached_property
    def _cost_cache(self) -> dict[int, CostTable]:
        return {}

    def cost_table(self, horizon: int | None = None) -> CostTable:
        T = self.horizon if horizon is None else int(horizon)
        cache = self._cost_cache
        if T not in cache:
            cache[T] = self.costs.table(self, T)
        return cache[T]

    def with_costs(self, costs: CostModel) -> Instance:
        return Instance(self.n_vertices, self.edges, self.obstacles, self.robots, self.targets,
                        self.horizon, costs, self.width, self.height, self.seed)

    def with_horizon(self, horizon: int) -> Instance:
        return Instance(self.n_vertices, self.edges, self.obstacles, self.robots, self.targets,
                        horizon, self.costs, self.width, self.height, self.seed)

    @cached_property
    def components(self) -> np.ndarray:
        """Strongly connected component label per vertex (obstacles get their own)."""
        K = self.n_vertices
        adj = csr_matrix((np.ones(self.n_edges), (self.src, self.dst)), shape=(K, K))
        _, labels = connected_components(adj, directed=True, connection="strong")
        return labels

    @property
    def connected(self) -> bool:
        """Whether the non-obstacle motion graph is strongly connected."""
        free = np.setdiff1d(np.arange(self.n_vertices), self.obstacles)
        return free.size == 0 or np.unique(self.components[free]).size == 1

    def coords(self, v: int) -> tuple[int, int]:
        """(row, col) of a grid vertex."""
        if self.width is None:
            raise ValueError("instance is not a grid")
        return divmod(v, self.width)


# ---------------------------------------------------------------------------
# generators


def grid_edges(width: int, height: int, obstacles=()) -> list[tuple[int, int]]:
    """4-neighbour grid edges plus self-loops, skipping obstacle cells."""
    blocked = set(obstacles)
    out = []
    for r in range(height):
        for c in range(width):
            i = r * width + c
            if i in blocked:
                continue
            for dr, dc in ((-1, 0), (0, -1), (0, 0), (0, 1), (1, 0)):
                rr, cc = r + dr, c + dc
                if 0 <= rr < height and 0 <= cc < width:
                    j = rr * width + cc
                    if j not in blocked:
                        out.append((i, j))
    return out


def _free_connected(width: int, height: int, blocked: np.ndarray) -> bool:
    K = width * height
    free = np.flatnonzero(~blocked)
    if free.size <= 1:
        return True
    seen = np.zeros(K, dtype=bool)
    stack = [int(free[0])]
    seen[free[0]] = True
    count = 1
    while stack:
        v = stack.pop()
        r, c = divmod(v, width)
        for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= rr < height and 0 <= cc < width:
                u = rr * width + cc
                if not blocked[u] and not seen[u]:
                    seen[u] = True
                    count += 1
                    stack.append(u)
    return count == free.size


def generate_grid(width: int, height: int, obstacles: int, robots: int, seed: int,
                  horizon: int = 30, costs: CostModel | None = None) -> Instance:
    """Random grid instance, a pure function of its arguments.

    Obstacles are drawn in a seeded random order and a candidate is skipped if
    it would disconnect the remaining free cells.  Robots and then targets are
    drawn without replacement from the free cells, so the two sets never
    overlap.
    """
    if width < 1 or height < 1:
        raise ValueError("width and height must be at least 1")
    K = width * height
    if obstacles < 0 or robots < 0 or robots + obstacles > K - robots:
        raise CapacityExceeded(
            f"{obstacles} obstacles + {robots} robots + {robots} targets exceed {K} cells")
    rng = np.random.default_rng(seed)
    blocked = np.zeros(K, dtype=bool)
    placed = 0
    for cand in rng.permutation(K):
        if placed == obstacles:
            break
        blocked[cand] = True
        if _free_connected(width, height, blocked):
            placed += 1
        else:
            blocked[cand] = False
    if placed < obstacles:
        raise CapacityExceeded(f"could only place {placed} of {obstacles} obstacles without disconnecting the grid")
    free = np.flatnonzero(~blocked)
    order = free[rng.permutation(free.size)]
    robot_cells = order[:robots]
    target_cells = order[robots:2 * robots]
    obs = np.flatnonzero(blocked)
    return Instance(
        n_vertices=K,
        edges=tuple(grid_edges(width, height, obs.tolist())),
        obstacles=tuple(obs.tolist()),
        robots=tuple(robot_cells.tolist()),
        targets=tuple(target_cells.tolist()),
        horizon=horizon,
        costs=costs if costs is not None else Uniform(),
        width=width,
        height=height,
        seed=seed,
    )


def path_graph(n: int, robots, targets, horizon: int, costs: CostModel | None = None) -> Instance:
    """A 1 x n grid (a path), handy for hand-checkable cases."""
    return Instance(n, tuple(grid_edges(n, 1)), (), tuple(robots), tuple(targets), horizon,
                    costs if costs is not None else Uniform(), width=n, height=1)


# ---------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    checks: dict[str, bool]
    messages: dict[str, str]
    advisories: list[str]

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    @property
    def failures(self) -> list[str]:
        return [k for k, v in self.checks.items() if not v]

    def to_dict(self) -> dict[str, Any]:
        return {"ok": self.ok, "checks": self.checks, "messages": self.messages,
                "advisories": self.advisories}


def _cost_ordering(inst: Instance, horizon: int) -> tuple[bool, str]:
    """0 = target waits < non-target waits < moves, on every slice."""
    if isinstance(inst.costs, ExponentialMakespan):
        row, _ = inst.costs.base_row(inst)
        vals = np.asarray(row, dtype=object)[None, :]
    else:
        vals = inst.cost_table(max(horizon, 1)).values
    loops = inst.loop_mask
    tgt = loops & inst.target_mask[inst.src]
    non = loops & ~tgt
    moves = ~loops
    for t in range(vals.shape[0]):
        row = vals[t]
        if tgt.any() and any(row[tgt] != 0):
            return False, f"slice {t + 1}: waiting at a target is not free"
        hi_wait = max(row[non]) if non.any() else None
        lo_move = min(row[moves]) if moves.any() else None
        if non.any() and min(row[non]) <= 0:
            return False, f"slice {t + 1}: non-target wait cost must be positive"
        if hi_wait is not None and lo_move is not None and not hi_wait < lo_move:
            return False, f"slice {t + 1}: a non-target wait ({hi_wait}) is not cheaper than a move ({lo_move})"
    return True, ""


def validate(inst: Instance) -> ValidationReport:
    """Report-only structural and cost checks."""
    checks: dict[str, bool] = {}
    msgs: dict[str, str] = {}
    adv: list[str] = []
    K = inst.n_vertices
    obstacles = set(inst.obstacles)
    free = [v for v in range(K) if v not in obstacles]
    loops = {i for i, j in inst.edges if i == j}
    missing = [v for v in free if v not in loops]
    checks["self_loops"] = not missing
    if missing:
        msgs["self_loops"] = f"vertices without a self-loop: {missing[:10]}"
    touching = [e for e in inst.edges if e[0] in obstacles or e[1] in obstacles]
    checks["obstacles_isolated"] = not touching
    if touching:
        msgs["obstacles_isolated"] = f"edges touching obstacles: {touching[:10]}"
    checks["balanced"] = len(inst.robots) == len(inst.targets)
    if not checks["balanced"]:
        msgs["balanced"] = f"{len(inst.robots)} robots vs {len(inst.targets)} targets"
    checks["distinct"] = len(set(inst.robots)) == len(inst.robots) and len(set(inst.targets)) == len(inst.targets)
    on_obs = sorted(obstacles & (set(inst.robots) | set(inst.targets)))
    checks["off_obstacles"] = not on_obs
    if on_obs:
        msgs["off_obstacles"] = f"robots/targets on obstacles: {on_obs}"
    occupied = sorted(set(inst.robots) | set(inst.targets))
    labels = inst.components
    checks["connected"] = len({labels[v] for v in occupied}) <= 1
    if not checks["connected"]:
        msgs["connected"] = "robots and targets do not share one strongly connected component"
    try:
        ok, msg = _cost_ordering(inst, inst.horizon)
    except Exception as exc:  # a cost model that cannot even be evaluated fails the check
        ok, msg = False, str(exc)
    checks["cost_ordering"] = ok
    if msg:
        msgs["cost_ordering"] = msg
    N = len(inst.robots)
    if 2 * N > K:
        adv.append(f"N={N} exceeds K/2={K / 2}; feasibility is not guaranteed a priori")
    if free and len(set(inst.robots) | set(inst.targets)) >= len(free):
        adv.append("every free vertex holds a robot or a target")
    return ValidationReport(checks, msgs, adv)


@dataclass
class CostConditionReport:
    no_oscillations: bool
    temporal_urgency: bool
    temporal_subadditivity: bool
    shortest_path: bool
    horizon: int

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


def validate_cost_conditions(inst: Instance, horizon: int | None = None) -> CostConditionReport:
    """Which optional cost properties hold over slices ``1..T``."""
    T = inst.horizon if horizon is None else horizon
    if T < 1:
        raise ValueError("a positive horizon is required")
    vals = inst.cost_table(T).values
    E = inst.edge_index
    src, dst = inst.src, inst.dst
    loop_of = {i: E[(i, i)] for i in range(inst.n_vertices) if (i, i) in E}

    out_of: dict[int, list[int]] = {}
    for e2, (k, _j) in enumerate(inst.edges):
        out_of.setdefault(k, []).append(e2)
    constant = all(bool(np.all(vals[t] == vals[0])) for t in range(T))
    osc = True
    sub = True
    for t in range(min(T - 1, 1) if constant else T - 1):
        cur, nxt = vals[t], vals[t + 1]
        for e, (i, j) in enumerate(inst.edges):
            if i == j:
                continue
            back = E.get((j, i))
            if back is not None and i in loop_of:
                if not cur[loop_of[i]] + nxt[loop_of[i]] < cur[e] + nxt[back]:
                    osc = False
                    break
        # c_ij,t <= c_ik,t + c_kj,t+1 for every two-step route i -> k -> j
        for e1 in range(inst.n_edges):
            i, k = int(src[e1]), int(dst[e1])
            for e2 in out_of.get(k, ()):
                direct = E.get((i, int(dst[e2])))
                if direct is not None and cur[direct] > cur[e1] + nxt[e2]:
                    sub = False
                    break
            if not sub:
                break
    urg = all(bool(np.all(vals[t] <= vals[t + 1])) for t in range(T - 1))
    shortest = isinstance(inst.costs, (Uniform, Metric)) or (
        constant and not isinstance(inst.costs, ExponentialMakespan))
    return CostConditionReport(osc, urg, sub, shortest, T)


# ---------------------------------------------------------------------------
# file I/O


def to_dict(inst: Instance) -> dict[str, Any]:
    d: dict[str, Any] = {"schema_version": SCHEMA_VERSION}
    if inst.width is not None:
        d["width"] = inst.width
        d["height"] = inst.height
    d.update({
        "vertices": inst.n_vertices,
        "edges": [list(e) for e in inst.edges],
        "obstacles": list(inst.obstacles),
        "robots": list(inst.robots),
        "targets": list(inst.targets),
        "horizon": inst.horizon,
        "cost_model": cost_model_to_dict(inst.costs),
    })
    if inst.seed is not None:
        d["seed"] = inst.seed
    return d


_REQUIRED = ("vertices", "edges", "obstacles", "robots", "targets", "horizon", "cost_model")


def from_dict(d: dict[str, Any]) -> Instance:
    if not isinstance(d, dict):
        raise ParseError("instance document must be a JSON object")
    version = d.get("schema_version")
    if version is None:
        raise ParseError("missing required field", field="schema_version")
    if version != SCHEMA_VERSION:
        raise VersionMismatch(f"schema_version {version!r} is not supported (expected {SCHEMA_VERSION})")
    for name in _REQUIRED:
        if name not in d:
            raise ParseError("missing required field", field=name)
    for name in ("edges", "obstacles", "robots", "targets"):
        if not isinstance(d[name], list):
            raise ParseError("expected a list", field=name)
    try:
        edges = tuple((int(a), int(b)) for a, b in d["edges"])
    except (TypeError, ValueError):
        raise ParseError("edges must be [i, j] pairs", field="edges") from None
    return Instance(
        n_vertices=int(d["vertices"]),
        edges=edges,
        obstacles=tuple(d["obstacles"]),
        robots=tuple(d["robots"]),
        targets=tuple(d["targets"]),
        horizon=int(d["horizon"]),
        costs=cost_model_from_dict(d["cost_model"]),
        width=d.get("width"),
        height=d.get("height"),
        seed=d.get("seed"),
    )


def dumps(inst: Instance) -> str:
    return json.dumps(to_dict(inst), separators=(",", ":"), sort_keys=False) + "\n"


def save(inst: Instance, path: str | Path) -> None:
    Path(path).write_text(dumps(inst), encoding="utf-8")


def loads(text: str) -> Instance:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    return from_dict(d)


def load(path: str | Path) -> Instance:
    return loads(Path(path).read_text(encoding="utf-8"))
