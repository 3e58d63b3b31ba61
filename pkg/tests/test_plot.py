from __future__ import annotations

import re

import numpy as np
import pytest

from mapfot import sinkhorn as sk
from conftest import optimal_arc_union
from mapfot.exact import solve_p1
from mapfot.instance import generate_grid
from mapfot.plot import emit_plot, metrics_svg, shadow_opacities, shadow_svg, trajectories_svg


def test_trajectories_markers_and_moves(tmp_path):
    inst = generate_grid(5, 4, 2, 3, seed=2, horizon=6)
    plan, _ = solve_p1(inst)
    text = trajectories_svg(inst, plan).text()
    assert text.count('class="robot"') == 3
    assert text.count('class="target"') == 3
    assert text.count('class="move"') == plan.moves
    assert text.startswith("<svg") or text.startswith("<?xml")


def test_identical_input_identical_bytes(tmp_path):
    inst = generate_grid(5, 4, 2, 3, seed=2, horizon=6)
    plan, _ = solve_p1(inst)
    a = emit_plot("trajectories", tmp_path / "a.svg", instance=inst, plan=plan)
    b = emit_plot("trajectories", tmp_path / "b.svg", instance=inst, plan=plan)
    assert a.read_bytes() == b.read_bytes()


def test_shadow_opacity_tracks_mass():
    # one robot on a 4 x 3 grid; at low temperature mass follows the shortest corridors
    inst = generate_grid(4, 3, 0, 1, seed=5, horizon=5)
    s = sk.run(inst, epsilon=0.1, max_sweeps=2000, tol=1e-6, boundary="strict")
    op = shadow_opacities(inst, s.slices)
    text = shadow_svg(inst, s.slices).text()
    emitted = {int(e): float(o) for e, o in re.findall(r'data-edge="(\d+)"[^>]*stroke-opacity="([\d.]+)"', text)}
    mass = s.slices.sum(axis=0)
    moves = np.flatnonzero(~inst.loop_mask)
    top = mass[moves].max()
    for e, o in emitted.items():
        assert o == pytest.approx(mass[e] / top, abs=1e-4)
    # the darkest emitted arc is the heaviest move arc
    assert max(emitted, key=emitted.get) == moves[np.argmax(mass[moves])]
    assert np.all(op[inst.loop_mask] == 0)


def test_optimal_corridor_arcs_are_darkest():
    inst = generate_grid(4, 3, 0, 1, seed=5, horizon=5)
    s = sk.run(inst, epsilon=0.05, max_sweeps=3000, tol=1e-6, boundary="strict")
    op = shadow_opacities(inst, s.slices)
    on = optimal_arc_union(inst, 5).any(axis=0) & ~inst.loop_mask
    off = ~on & ~inst.loop_mask
    assert on.any() and off.any()
    assert op[on].min() > 10 * op[off].max()


def test_metrics_plot(tmp_path):
    svg = metrics_svg({"b": ([1, 2, 3], [3, 1, 2]), "a": ([1, 10], [1, 100])}, "x", "y", logx=True, logy=True)
    text = svg.text()
    assert text.index(">a<") < text.index(">b<")
    with pytest.raises(ValueError):
        emit_plot("pie", tmp_path / "x.svg")
