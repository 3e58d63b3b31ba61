from __future__ import annotations

import csv
import math

import numpy as np
import pytest

from conftest import optimal_arc_union
from mapfot import sinkhorn as sk
from mapfot.errors import NonPositiveEpsilon, SupportMismatch, TensorTooLarge
from mapfot.instance import Instance, Uniform, generate_grid, path_graph


def test_equal_costs_give_uniform_kernel():
    inst = generate_grid(3, 3, 0, 1, seed=0, horizon=2).with_costs(Uniform(1, 1, 1))
    k = sk.gibbs_kernel(inst, 2, 0.3)
    assert np.allclose(k.g, 1.0 / inst.n_edges)
    assert np.allclose(k.g.sum(axis=1), 1.0)


def test_two_edge_ratio():
    inst = Instance(2, ((0, 0), (0, 1), (1, 1)), (), (0,), (1,), 1)  # wait 1/2, move 1
    k = sk.gibbs_kernel(inst, 1, 0.5)
    g = dict(zip(inst.edges, k.g[0]))
    assert g[(0, 0)] / g[(0, 1)] == pytest.approx(math.e)
    assert g[(1, 1)] / g[(0, 1)] == pytest.approx(math.e ** 2)


def test_nonpositive_epsilon():
    inst = path_graph(2, [0], [1], 1)
    with pytest.raises(NonPositiveEpsilon):
        sk.gibbs_kernel(inst, 1, 0.0)
    with pytest.raises(NonPositiveEpsilon):
        sk.run(inst, epsilon=-1)


def test_single_vertex_converges_in_one_sweep():
    inst = Instance(1, ((0, 0),), (), (0,), (0,), 3)
    s = sk.run(inst, epsilon=0.2)
    assert s.trace[0] == pytest.approx(0.0, abs=1e-12)
    assert s.sweeps == 1 and s.converged


@pytest.mark.parametrize("boundary", ["keep", "strict"])
def test_log_and_linear_agree(boundary):
    inst = generate_grid(4, 4, 2, 3, seed=2, horizon=5)
    a = sk.run(inst, epsilon=0.3, max_sweeps=60, tol=0, stabilized=False, boundary=boundary)
    b = sk.run(inst, epsilon=0.3, max_sweeps=60, tol=0, stabilized=True, boundary=boundary)
    assert np.max(np.abs(a.slices - b.slices)) < 1e-8
    assert np.allclose(a.trace, b.trace, atol=1e-8)


def test_auto_stabilization():
    inst = path_graph(3, [0], [2], 3)
    assert sk.run(inst, epsilon=0.1, max_sweeps=5).stabilized
    assert not sk.run(inst, epsilon=0.5, max_sweeps=5).stabilized


def test_trace_is_reproducible():
    inst = generate_grid(5, 5, 3, 4, seed=8, horizon=6)
    a = sk.run(inst, epsilon=0.2, max_sweeps=80)
    b = sk.run(inst, epsilon=0.2, max_sweeps=80)
    assert a.trace == b.trace
    assert np.array_equal(a.slices, b.slices)


def test_one_step_gluing_with_full_damping():
    inst = generate_grid(3, 3, 0, 2, seed=3, horizon=2)
    m = sk.SinkhornMAPF(inst, 2, 0.4, damping=1.0)
    m.project_start()
    m.forward()
    rows, cols = m.marginals()
    assert np.allclose(cols[0], rows[1], atol=1e-12)


def test_partial_damping_does_not_glue_at_once():
    inst = generate_grid(3, 3, 0, 2, seed=3, horizon=2)
    m = sk.SinkhornMAPF(inst, 2, 0.4, damping=0.5)
    m.project_start()
    m.forward()
    rows, cols = m.marginals()
    assert not np.allclose(cols[0], rows[1], atol=1e-6)
    with pytest.raises(ValueError):
        sk.SinkhornMAPF(inst, 2, 0.4, damping=0.0)


def test_strict_boundary_matches_marginals():
    inst = generate_grid(4, 3, 1, 2, seed=5, horizon=5)
    s = sk.run(inst, epsilon=0.3, max_sweeps=3000, boundary="strict")
    assert s.residual < 1e-6
    assert np.allclose(s.departures(1), inst.mu, atol=1e-6)
    assert np.allclose(s.arrivals(s.horizon), inst.nu, atol=1e-6)


def test_keep_boundary_residual_nonincreasing_overall():
    inst = generate_grid(5, 5, 2, 3, seed=1, horizon=6)
    s = sk.run(inst, epsilon=0.2, max_sweeps=400)
    assert s.trace[-1] < s.trace[0]
    assert np.all(s.slices >= 0)


def test_low_temperature_concentrates_on_optimal_arcs():
    inst = generate_grid(3, 3, 0, 1, seed=4, horizon=4)
    mask = optimal_arc_union(inst, 4)
    s = sk.run(inst, epsilon=0.05, max_sweeps=3000, tol=1e-6, boundary="strict")
    assert s.slices[mask].sum() >= 0.9 * s.slices.sum()


def test_stalled_rule():
    assert not sk.stalled([1.0] * 5, 1e-3)
    assert sk.stalled([1.0] * 25, 1e-3)
    assert not sk.stalled(list(np.linspace(1, 0.5, 25)), 1e-3)
    assert sk.stalled([1.0, 1e-10], 1e-3)


def test_shadow_files(tmp_path):
    inst = generate_grid(3, 3, 0, 2, seed=1, horizon=3)
    s = sk.run(inst, epsilon=0.3, max_sweeps=30)
    sk.save_shadow(s, tmp_path / "shadow.json", tmp_path / "trace.csv")
    back = sk.load_shadow(inst, tmp_path / "shadow.json")
    assert np.array_equal(back.slices, s.slices)
    assert back.sweeps == s.sweeps and back.epsilon == s.epsilon
    with open(tmp_path / "trace.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["sweep", "residual"]
    assert [float(r[1]) for r in rows[1:]] == s.trace


def test_kl_decomposition_random_chains():
    rng = np.random.default_rng(0)
    for _ in range(10):
        K, T = int(rng.integers(2, 5)), int(rng.integers(1, 4))
        lhs, rhs = sk.kl_decomposition_check(sk.random_markov_slices(rng, K, T), sk.random_markov_slices(rng, K, T))
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


def test_kl_decomposition_against_gibbs_chain():
    inst = path_graph(3, [0], [2], 3)
    g = sk.gibbs_chain_slices(sk.gibbs_kernel(inst, 3, 0.5))
    p = sk.random_markov_slices(np.random.default_rng(1), 3, 3)
    with np.errstate(divide="ignore"):
        lhs, rhs = sk.kl_decomposition_check(p, g)
    # p has full support, the path graph does not: both sides are infinite
    assert math.isinf(lhs) and math.isinf(rhs)
    lhs, rhs = sk.kl_decomposition_check(g, g)
    assert abs(lhs) < 1e-12 and abs(rhs) < 1e-12


def test_kl_tensor_budget():
    rng = np.random.default_rng(0)
    with pytest.raises(TensorTooLarge):
        sk.kl_decomposition_check(sk.random_markov_slices(rng, 10, 4), sk.random_markov_slices(rng, 10, 4))


def test_kl_gibbs_identity():
    rng = np.random.default_rng(3)
    c = rng.uniform(0, 2, 7)
    pi = rng.uniform(0, 1, 7)
    pi[2] = 0.0
    N = float(pi.sum())
    lhs, rhs = sk.kl_gibbs_identity_check(pi, c, 0.3, N)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_kl_gibbs_support_mismatch():
    with pytest.raises(SupportMismatch):
        sk.kl_gibbs_identity_check(np.array([0.5, 0.5]), np.zeros(2), 0.1, 1.0, kernel_slice=np.array([1.0, 0.0]))


def test_strict_sweeps_fall_as_temperature_rises():
    for seed in range(3):
        inst = generate_grid(8, 8, 3, 3, seed, horizon=10)
        sweeps = [sk.run(inst, epsilon=e, max_sweeps=20000, boundary="strict").sweeps for e in (0.1, 0.5, 1.0)]
        assert sweeps[0] > sweeps[1] > sweeps[2]
