from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import corpus, ring_instance
from mapfot import sinkhorn as sk
from mapfot.errors import Infeasible
from mapfot.exact import solve_p1
from mapfot.instance import Instance, generate_grid, path_graph
from mapfot.project import (KeepFraction, P3Params, Threshold, load_mask, modified_costs, prune,
                            remove_slice_cycles, solve_p3)
from mapfot.verify import check_plan


def _shadow(inst, slices):
    return sk.ShadowTransport(np.asarray(slices, float), [], 0.0, 0, True, 0.2, False, 1.0,
                              inst.src, inst.dst, inst.n_vertices)


@pytest.fixture
def grid_shadow():
    inst = generate_grid(5, 5, 2, 3, seed=6, horizon=6)
    return inst, sk.run(inst, epsilon=0.2, max_sweeps=200)


def test_keep_everything(grid_shadow):
    inst, s = grid_shadow
    assert prune(s, KeepFraction(1.0)).mask.all()


def test_threshold_above_max_keeps_loops(grid_shadow):
    inst, s = grid_shadow
    m = prune(s, Threshold(float(s.slices.max())))
    assert np.array_equal(m.mask, np.broadcast_to(inst.loop_mask, m.mask.shape))


def test_keep_fraction_counts(grid_shadow):
    inst, s = grid_shadow
    m = prune(s, KeepFraction(0.3))
    n_keep = math.ceil(0.3 * inst.n_edges)
    for t in range(s.horizon):
        heavy = np.argsort(-s.slices[t], kind="stable")[:n_keep]
        assert m.mask[t, heavy].all()
        assert m.mask[t].sum() == len(set(heavy.tolist()) | set(np.flatnonzero(inst.loop_mask).tolist()))
    with pytest.raises(ValueError):
        KeepFraction(0.0)


def test_mask_file_round_trip(tmp_path, grid_shadow):
    inst, s = grid_shadow
    m = prune(s, KeepFraction(0.4))
    m.save(inst, tmp_path / "mask.json")
    back = load_mask(inst, tmp_path / "mask.json")
    assert np.array_equal(back.mask, m.mask)


def test_modified_costs_lambda_zero(grid_shadow):
    inst, s = grid_shadow
    vals, scale = modified_costs(inst, s, 0.0)
    tab = inst.cost_table(s.horizon)
    assert np.array_equal(vals, tab.values) and scale == tab.scale


def test_uniform_shadow_shifts_by_constant():
    inst = generate_grid(3, 3, 0, 2, seed=2, horizon=3)
    s = _shadow(inst, np.full((3, inst.n_edges), 0.05))
    vals, scale = modified_costs(inst, s, 1.0, 1e-6)
    base = inst.cost_table(3).values / inst.cost_table(3).scale
    diff = vals / scale - base
    exempt = inst.loop_mask & inst.target_mask[inst.src]
    for t in range(3):
        assert np.allclose(diff[t, ~exempt], diff[t, ~exempt][0], atol=1e-6)
    assert np.allclose(diff[:, exempt], 0.0)


def test_dark_arc_is_cheaper():
    inst = path_graph(3, [1], [2], 1)
    e_hot, e_cold = inst.edge_index[(1, 2)], inst.edge_index[(1, 0)]
    sl = np.zeros((1, inst.n_edges))
    sl[0, e_hot], sl[0, e_cold] = 0.9, 1e-9
    vals, scale = modified_costs(inst, _shadow(inst, sl), 1.0, 1e-6)
    gap = (vals[0, e_cold] - vals[0, e_hot]) / scale
    assert gap == pytest.approx(math.log((0.9 + 1e-6) / (1e-9 + 1e-6)), abs=1e-5)
    assert vals.min() >= 0


def test_full_mask_recovers_p1():
    for inst in corpus(40, start=4000):
        if inst.horizon == 0:
            continue
        try:
            _, r1 = solve_p1(inst)
        except Infeasible:
            continue
        s = sk.run(inst, epsilon=0.3, max_sweeps=50)
        plan, r3, _ = solve_p3(inst, s, P3Params(policy=KeepFraction(1.0)))
        assert r3.cost_scaled == r1.cost_scaled
        assert check_plan(inst, plan).passed


def test_fallback_widens_mask():
    # a shadow with all mass on loops prunes every move; retries must restore them
    inst = path_graph(4, [0], [3], 3)
    sl = np.where(inst.loop_mask, 1.0, 0.0)[None, :].repeat(3, axis=0)
    plan, rep, mask = solve_p3(inst, _shadow(inst, sl), P3Params(policy=KeepFraction(0.1)))
    assert rep.extra["retries"]
    assert rep.extra["retries"][1]["kept_fraction"] >= rep.extra["retries"][0]["kept_fraction"]
    assert check_plan(inst, plan).passed
    assert rep.cost == 3


def test_infeasible_full_graph():
    inst = path_graph(4, [0], [3], 2)
    s = _shadow(inst, np.ones((2, inst.n_edges)))
    with pytest.raises(Infeasible):
        solve_p3(inst, s)


def test_p3_never_beats_p1(grid_shadow):
    inst, s = grid_shadow
    _, r1 = solve_p1(inst)
    for f in (0.25, 0.4, 0.7):
        plan, r3, _ = solve_p3(inst, s, P3Params(policy=KeepFraction(f)), p1_cost=r1.cost_scaled)
        assert r3.cost_scaled >= r1.cost_scaled
        assert r3.extra["gap"] >= 0
        assert check_plan(inst, plan).passed


def test_lambda_positive_result_is_verified(grid_shadow):
    inst, s = grid_shadow
    plan, rep, _ = solve_p3(inst, s, P3Params(lam=0.5))
    assert check_plan(inst, plan).passed
    assert rep.extra["cost_scale_modified"] == 10**6


def test_remove_slice_cycles():
    edges = ((0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (2, 0))
    inst = Instance(3, edges, (), (0, 1, 2), (0, 1, 2), 1)
    flows = np.zeros((1, 6), np.int64)
    flows[0, [inst.edge_index[e] for e in ((0, 1), (1, 2), (2, 0))]] = 1
    from mapfot.plan import TransportPlan
    plan, n = remove_slice_cycles(inst, TransportPlan.for_instance(inst, flows))
    assert n == 1 and plan.moves == 0
    assert check_plan(inst, plan).passed


def test_sparse_network_keeps_p1_cost():
    # 40 x 40, 20 robots, T = 15, about a quarter of the move arcs retained
    inst = ring_instance(40, 40, 80, 20, seed=0, horizon=15, distance=9)
    _, r1 = solve_p1(inst)
    s = sk.run(inst, epsilon=0.2, max_sweeps=500)
    plan, r3, mask = solve_p3(inst, s, P3Params(policy=KeepFraction(0.23)), p1_cost=r1.cost_scaled)
    assert r3.cost_scaled == r1.cost_scaled
    assert mask.kept_fraction < 0.35
    assert check_plan(inst, plan).passed


def test_gap_shrinks_with_kept_fraction_on_average():
    gaps = {f: [] for f in (0.25, 0.4, 1.0)}
    for seed in range(10):
        inst = generate_grid(12, 12, 7, 12, seed=seed, horizon=12)
        try:
            _, r1 = solve_p1(inst)
        except Infeasible:
            continue
        s = sk.run(inst, epsilon=0.2, max_sweeps=300)
        for f in gaps:
            gaps[f].append(solve_p3(inst, s, P3Params(policy=KeepFraction(f)), p1_cost=r1.cost_scaled)[1].extra["gap"])
    assert len(gaps[1.0]) >= 5
    means = [np.mean(gaps[f]) for f in (0.25, 0.4, 1.0)]
    assert means[0] >= means[1] >= means[2] == 0
