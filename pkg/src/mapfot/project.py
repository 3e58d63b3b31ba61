"""Shadow-guided pruning and the integral re-solve on the pruned network."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Union

import numpy as np

from . import timeexp
from .errors import Infeasible
from .exact import SolveReport, solve_on_network
from .instance import Instance
from .plan import TransportPlan
from .sinkhorn import ShadowTransport
from .verify import _slice_cycle

COST_DENOMINATOR = 10**6
FALLBACK_FACTOR = 1.5


@dataclass(frozen=True)
class KeepFraction:
    fraction: float

    def __post_init__(self):
        if not 0 < self.fraction <= 1:
            raise ValueError("kept fraction must lie in (0, 1]")


@dataclass(frozen=True)
class Threshold:
    prune_threshold: float


RetentionPolicy = Union[KeepFraction, Threshold]


@dataclass(frozen=True)
class P3Params:
    lam: float = 0.0
    delta: float = 1e-6
    policy: RetentionPolicy = KeepFraction(0.4)
    fallback_factor: float = FALLBACK_FACTOR
    max_retries: int = 12

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.fallback_factor > 1:
            raise ValueError("fallback factor must exceed 1")


@dataclass(frozen=True, eq=False)
class PruneMask:
    mask: np.ndarray  # (T, E) bool

    @property
    def kept_per_slice(self) -> np.ndarray:
        return self.mask.mean(axis=1)

    @property
    def kept_fraction(self) -> float:
        return float(self.mask.mean()) if self.mask.size else 1.0

    def to_dict(self, inst: Instance) -> dict[str, Any]:
        return {
            "kept_fraction": self.kept_fraction,
            "slices": [{"t": t + 1, "arcs": [[int(inst.src[e]), int(inst.dst[e])] for e in np.flatnonzero(row)]}
                       for t, row in enumerate(self.mask)],
        }

    def save(self, inst: Instance, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(inst), separators=(",", ":")) + "\n", encoding="utf-8")


def load_mask(inst: Instance, path: str | Path) -> PruneMask:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    T = len(d["slices"])
    mask = np.zeros((T, inst.n_edges), dtype=bool)
    index = inst.edge_index
    for s in d["slices"]:
        for i, j in s["arcs"]:
            mask[int(s["t"]) - 1, index[(int(i), int(j))]] = True
    return PruneMask(mask)


def prune(shadow: ShadowTransport, policy: RetentionPolicy) -> PruneMask:
    """Arcs to keep per slice; self-loops always survive.

    ``KeepFraction(f)`` keeps the ``ceil(f E)`` heaviest arcs of each slice
    (ties go to the lower edge index); ``Threshold(h)`` keeps arcs with mass
    strictly above ``h``.
    """
    S = np.asarray(shadow.slices)
    T, E = S.shape
    loops = shadow.src == shadow.dst
    if isinstance(policy, KeepFraction):
        n_keep = min(E, math.ceil(policy.fraction * E - 1e-9))
        mask = np.zeros((T, E), dtype=bool)
        for t in range(T):
            order = np.argsort(-S[t], kind="stable")
            mask[t, order[:n_keep]] = True
    elif isinstance(policy, Threshold):
        mask = S > policy.prune_threshold
    else:
        raise TypeError(f"unknown retention policy {policy!r}")
    mask |= loops[None, :]
    return PruneMask(mask)


def modified_costs(inst: Instance, shadow: ShadowTransport, lam: float, delta: float = 1e-6,
                   T: int | None = None) -> tuple[np.ndarray, int]:
    """Integer arc costs ``c - lam * log(min(pi, 1) + delta)`` and their scale.

    Waiting at a target keeps its cost.  Each slice is shifted by a constant
    if needed to keep every entry nonnegative.  ``lam = 0`` returns the
    instance's own integer table unchanged.
    """
    T = shadow.horizon if T is None else T
    tab = inst.cost_table(T)
    if lam == 0:
        return tab.values, tab.scale
    c = tab.values.astype(np.float64) / tab.scale
    exempt = inst.loop_mask & inst.target_mask[inst.src]
    pi = np.clip(np.asarray(shadow.slices, dtype=np.float64), 0.0, 1.0)
    m = c - lam * np.log(pi + delta)
    m[:, exempt] = c[:, exempt]
    low = m.min(axis=1, keepdims=True)
    m = m - np.minimum(low, 0.0)
    return np.rint(m * COST_DENOMINATOR).astype(np.int64), COST_DENOMINATOR


def remove_slice_cycles(inst: Instance, plan: TransportPlan) -> tuple[TransportPlan, int]:
    """Replace every directed cycle of moves within a slice by waits.

    Occupancies are unchanged and, when waits are cheaper than moves, the
    original cost strictly drops.  Returns the new plan and the number of
    cycles removed.
    """
    flows = plan.flows.copy()
    index = inst.edge_index
    mv = plan.move_mask
    removed = 0
    for t in range(flows.shape[0]):
        while True:
            used = np.flatnonzero((flows[t] > 0) & mv)
            cyc = _slice_cycle(inst.src[used], inst.dst[used])
            if cyc is None:
                break
            for a, b in zip(cyc, cyc[1:] + cyc[:1]):
                flows[t, index[(a, b)]] -= 1
                flows[t, index[(a, a)]] += 1
            removed += 1
    return TransportPlan.for_instance(inst, flows), removed


def solve_p3(inst: Instance, shadow: ShadowTransport, params: P3Params = P3Params(),
             p1_cost: int | None = None, backend: str = "auto"
             ) -> tuple[TransportPlan, SolveReport, PruneMask]:
    """Integral plan restricted to the shadow-pruned network.

    On infeasibility the kept fraction grows by ``fallback_factor`` (capped
    at the full graph) and the solve is retried.  ``p1_cost`` (scaled
    integers) adds a gap to the report.
    """
    start = time.perf_counter()
    T = shadow.horizon
    obj = inst.cost_table(T)
    costs, cscale = modified_costs(inst, shadow, params.lam, params.delta, T)
    policy = params.policy
    retries: list[dict[str, Any]] = []
    while True:
        mask = prune(shadow, policy)
        teg = timeexp.build(inst, T, mask=mask.mask, costs=costs)
        try:
            plan, report = solve_on_network(inst, teg, obj.values, backend=backend)
            break
        except Infeasible:
            full = mask.mask.all()
            retries.append({"policy": _policy_dict(policy), "kept_fraction": mask.kept_fraction})
            if full or len(retries) > params.max_retries:
                raise
            base = policy.fraction if isinstance(policy, KeepFraction) else mask.kept_fraction
            policy = KeepFraction(min(1.0, base * params.fallback_factor))
    cycles = 0
    if params.lam > 0:
        plan, cycles = remove_slice_cycles(inst, plan)
        report.cost_scaled = int((plan.flows * obj.values).sum()) if obj.values.dtype != object else sum(
            int(f) * c for f, c in zip(plan.flows.ravel().tolist(), obj.values.ravel().tolist()) if f)
        report.makespan, report.moves = plan.makespan, plan.moves
    report.wall_time = time.perf_counter() - start
    report.extra.update({
        "kept_fraction": mask.kept_fraction,
        "retries": retries,
        "policy": _policy_dict(policy),
        "lambda": params.lam,
        "delta": params.delta,
        "cost_scale_modified": cscale,
        "cycles_removed": cycles,
    })
    if p1_cost is not None:
        report.extra["gap"] = (report.cost_scaled - p1_cost) / p1_cost if p1_cost else 0.0
    return plan, report, mask


def _policy_dict(policy: RetentionPolicy) -> dict[str, Any]:
    if isinstance(policy, KeepFraction):
        return {"keep": policy.fraction}
    return {"prune_threshold": policy.prune_threshold}
