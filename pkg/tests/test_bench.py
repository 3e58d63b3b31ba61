from __future__ import annotations

import json

import numpy as np
import pytest

from mapfot import bench
from mapfot.bench import ExperimentConfig, HEADER, WALL_COLUMNS


def _cfg(tmp_path, **kw):
    base = dict(grid_sizes=(8, 10), density=0.05, horizon=10, repetitions=2, max_sweeps=60,
                out_dir=str(tmp_path))
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(density=0.0)
    with pytest.raises(ValueError):
        ExperimentConfig(epsilons=())
    assert ExperimentConfig().instance_seed(20, 1) == ExperimentConfig().instance_seed(20, 1)
    assert ExperimentConfig().instance_seed(20, 1) != ExperimentConfig(seed=1).instance_seed(20, 1)


def test_make_instance_density():
    inst = bench.make_instance(ExperimentConfig(), 50, 3)
    assert inst.n_vertices == 2500 and len(inst.robots) == 125 and inst.horizon == 30


def test_fit_power_law_recovers_exponent():
    K = np.array([100.0, 400, 900, 1600, 2500])
    a, p, b = bench.fit_power_law(K, 3e-5 * K**1.7 + 0.01)
    assert p == pytest.approx(1.7, abs=0.05)


def test_scaling_study_outputs(tmp_path):
    res = bench.run_study(_cfg(tmp_path, grid_sizes=(6, 8, 10)), "scaling")
    assert res.rows
    assert {"p1_exponent", "pipeline_exponent"} <= set(res.fits)
    rows = bench.read_csv(tmp_path / "scaling.csv")
    assert list(rows[0]) == HEADER
    nowall = bench.read_csv(tmp_path / "scaling_nowall.csv")
    assert not set(WALL_COLUMNS) & set(nowall[0])
    man = json.loads((tmp_path / "scaling_manifest.json").read_text())
    assert man["study"] == "scaling" and len(man["rows"]) == len(res.rows)
    assert all(r["integral"] == "true" for r in rows)
    assert (tmp_path / "scaling_gap.svg").exists()


def test_kept_study_gap_reaches_zero(tmp_path):
    res = bench.run_study(_cfg(tmp_path, keep_fractions=(0.3, 1.0)), "kept")
    by = bench.mean_by(res, "kept_pct", "gap_pct")
    assert by[max(by)] == 0.0
    assert all(g >= 0 for g in res.column("gap_pct"))


def test_sensitivity_and_nonuniform(tmp_path):
    res = bench.run_study(_cfg(tmp_path, grid_sizes=(8,), epsilons=(0.2, 0.5), lambdas=(0.0, 0.5)), "sensitivity")
    assert {(r.epsilon, r.lam) for r in res.rows} == {(0.2, 0.0), (0.2, 0.5), (0.5, 0.0), (0.5, 0.5)}
    nu = bench.run_study(_cfg(tmp_path / "nu", grid_sizes=(8,)), "nonuniform")
    assert nu.rows and all(r.integral for r in nu.rows)


def test_deterministic_csv_without_wall(tmp_path):
    for name in ("a", "b"):
        bench.run_study(_cfg(tmp_path / name, save_artifacts=True), "kept")
    assert (tmp_path / "a/kept_nowall.csv").read_bytes() == (tmp_path / "b/kept_nowall.csv").read_bytes()
    files = sorted(p.name for p in (tmp_path / "a/artifacts").iterdir())
    assert files == sorted(p.name for p in (tmp_path / "b/artifacts").iterdir())
    for f in files:
        assert (tmp_path / "a/artifacts" / f).read_bytes() == (tmp_path / "b/artifacts" / f).read_bytes()


def test_parallel_matches_serial(tmp_path):
    a = bench.run_study(_cfg(tmp_path / "s"), "scaling")
    b = bench.run_study(_cfg(tmp_path / "p", workers=2), "scaling")
    assert (tmp_path / "s/scaling_nowall.csv").read_bytes() == (tmp_path / "p/scaling_nowall.csv").read_bytes()
    assert len(a.rows) == len(b.rows)
