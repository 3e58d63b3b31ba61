"""Experiment harness: scaling, sensitivity, cost-vs-kept and non-uniform cost studies.

Each study returns :class:`MetricsRow` records in a stable order and can
write them as CSV next to a manifest that links every row to its instance,
plan and mask files.  Wall-time columns are the only nondeterministic output.
"""

from __future__ import annotations

import csv
import json
import logging
import time
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from . import instance as inst_mod
from . import sinkhorn
from .errors import Infeasible, MapfError
from .exact import solve_p1
from .instance import Instance, NonUniformRandom, generate_grid
from .plan import save_plan
from .plot import emit_plot
from .project import KeepFraction, P3Params, solve_p3
from .verify import check_plan

log = logging.getLogger(__name__)

WALL_COLUMNS = ("p1_time", "sinkhorn_time", "p3_time", "speedup")


@dataclass(frozen=True)
class ExperimentConfig:
    grid_sizes: tuple[int, ...] = (20, 30, 40, 50)
    density: float = 0.05
    horizon: int = 30
    epsilons: tuple[float, ...] = (0.2,)
    lambdas: tuple[float, ...] = (0.0,)
    keep: float = 0.4
    keep_fractions: tuple[float, ...] = (0.3, 0.4, 0.5, 0.6, 0.8, 1.0)
    repetitions: int = 3
    seed: int = 0
    max_sweeps: int = 500
    tol: float = 1e-3
    delta: float = 1e-6
    damping: float = 1.0
    costs: str = "uniform"
    workers: int = 1
    out_dir: str | None = None
    save_artifacts: bool = False

    def __post_init__(self):
        if not 0 < self.density <= 0.5:
            raise ValueError("density must lie in (0, 0.5]")
        for name in ("grid_sizes", "epsilons", "lambdas", "keep_fractions"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")
        if self.repetitions < 1:
            raise ValueError("repetitions must be positive")

    def instance_seed(self, width: int, rep: int) -> int:
        return int(zlib.crc32(f"{self.seed}:{width}:{rep}".encode()) % (2**31))


@dataclass
class MetricsRow:
    K: int
    N: int
    T: int
    epsilon: float
    lam: float
    kept_pct: float
    p1_cost: float
    p3_cost: float
    gap_pct: float
    p1_time: float
    sinkhorn_time: float
    p3_time: float
    speedup: float
    sweeps: int
    feasible: bool
    integral: bool


HEADER = [f.name for f in fields(MetricsRow)]


@dataclass
class RowTask:
    study: str
    width: int
    rep: int
    seed: int
    epsilon: float
    lam: float
    keep: float


@dataclass
class StudyResult:
    rows: list[MetricsRow]
    keys: list[dict[str, Any]]
    fits: dict[str, float] = field(default_factory=dict)
    failures: list[dict[str, Any]] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=np.float64)


def make_instance(cfg: ExperimentConfig, width: int, seed: int) -> Instance:
    N = max(1, int(round(cfg.density * width * width)))
    costs = NonUniformRandom(seed) if cfg.costs == "nonuniform" else None
    return generate_grid(width, width, 0, N, seed, horizon=cfg.horizon, costs=costs)


def _pipeline_rows(cfg: ExperimentConfig, inst: Instance, p1_cost, p1_time, eps, lams, keeps,
                   artifacts: Path | None, tag: str) -> list[tuple[MetricsRow, dict[str, Any]]]:
    """One shadow at ``eps``, then one P3 solve per (lambda, keep)."""
    T = inst.horizon
    shadow = sinkhorn.run(inst, T, eps, cfg.damping, cfg.max_sweeps, cfg.tol)
    out = []
    scale = inst.cost_table(T).scale
    for lam in lams:
        for keep in keeps:
            params = P3Params(lam=lam, delta=cfg.delta, policy=KeepFraction(keep))
            plan, rep, mask = solve_p3(inst, shadow, params, p1_cost=p1_cost)
            ver = check_plan(inst, plan)
            cost = rep.cost_scaled / scale
            p1 = p1_cost / scale
            pipe = shadow.wall_time + rep.wall_time
            row = MetricsRow(
                K=inst.n_vertices, N=len(inst.robots), T=T, epsilon=eps, lam=lam,
                kept_pct=100.0 * mask.kept_fraction, p1_cost=p1, p3_cost=cost,
                gap_pct=100.0 * (cost - p1) / p1 if p1 else 0.0,
                p1_time=p1_time, sinkhorn_time=shadow.wall_time, p3_time=rep.wall_time,
                speedup=p1_time / pipe if pipe > 0 else float("nan"),
                sweeps=shadow.sweeps, feasible=not rep.extra["retries"], integral=ver.passed,
            )
            meta: dict[str, Any] = {"keep": keep, "retries": len(rep.extra["retries"]), "verified": ver.passed}
            if artifacts is not None:
                name = f"{tag}_eps{eps:g}_lam{lam:g}_keep{keep:g}"
                save_plan(plan, artifacts / f"{name}_p3.json", cost=cost)
                mask.save(inst, artifacts / f"{name}_mask.json")
                meta.update(p3_plan=f"{name}_p3.json", mask=f"{name}_mask.json")
            out.append((row, meta))
    return out


_WARM = False


def _warm_up() -> None:
    """Load the compiled kernels once per process so timings exclude JIT work."""
    global _WARM
    if _WARM:
        return
    inst = generate_grid(3, 3, 0, 1, 0, horizon=2)
    solve_p1(inst)
    sinkhorn.run(inst, 2, 0.2, max_sweeps=2)
    sinkhorn.run(inst, 2, 0.1, max_sweeps=2)
    _WARM = True


def _run_task(cfg: ExperimentConfig, study: str, width: int, rep: int) -> dict[str, Any]:
    _warm_up()
    seed = cfg.instance_seed(width, rep)
    inst = make_instance(cfg, width, seed)
    artifacts = None
    tag = f"{study}_W{width}_r{rep}"
    base = {"study": study, "width": width, "rep": rep, "seed": seed}
    if cfg.save_artifacts and cfg.out_dir:
        artifacts = Path(cfg.out_dir) / "artifacts"
        artifacts.mkdir(parents=True, exist_ok=True)
        inst_mod.save(inst, artifacts / f"{tag}_instance.json")
        base["instance"] = f"{tag}_instance.json"
    try:
        t0 = time.perf_counter()
        p1_plan, p1_rep = solve_p1(inst)
        p1_time = time.perf_counter() - t0
        p1_ok = check_plan(inst, p1_plan).passed
        if artifacts is not None:
            save_plan(p1_plan, artifacts / f"{tag}_p1.json", cost=float(p1_rep.cost))
            base["p1_plan"] = f"{tag}_p1.json"
        keeps = cfg.keep_fractions if study == "kept" else (cfg.keep,)
        eps_list = cfg.epsilons if study == "sensitivity" else cfg.epsilons[:1]
        lams = cfg.lambdas if study == "sensitivity" else cfg.lambdas[:1]
        rows = []
        for eps in eps_list:
            for row, meta in _pipeline_rows(cfg, inst, p1_rep.cost_scaled, p1_time, eps, lams, keeps,
                                            artifacts, tag):
                row.integral = row.integral and p1_ok
                rows.append((asdict(row), {**base, **meta}))
        return {"rows": rows}
    except (Infeasible, MapfError) as exc:
        log.warning("%s W=%d rep=%d seed=%d skipped: %s", study, width, rep, seed, exc)
        return {"rows": [], "failure": {**base, "error": f"{type(exc).__name__}: {exc}"}}


def _run_study(cfg: ExperimentConfig, study: str) -> StudyResult:
    tasks = [(w, r) for w in cfg.grid_sizes for r in range(cfg.repetitions)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_run_task, [cfg] * len(tasks), [study] * len(tasks),
                                    [w for w, _ in tasks], [r for _, r in tasks]))
    else:
        results = [_run_task(cfg, study, w, r) for w, r in tasks]
    out = StudyResult([], [])
    collected = []
    for res in results:
        collected.extend(res["rows"])
        if "failure" in res:
            out.failures.append(res["failure"])
    collected.sort(key=lambda rm: (rm[0]["K"], rm[1]["seed"], rm[0]["epsilon"], rm[0]["lam"], rm[1].get("keep", 0)))
    for row, meta in collected:
        out.rows.append(MetricsRow(**row))
        out.keys.append(meta)
    return out


def _power(K, a, p, b):
    return a * np.power(K, p) + b


def fit_power_law(K: Sequence[float], y: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares ``a K^p + b``; the log-log slope seeds the exponent."""
    K = np.asarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    slope, icpt = np.polyfit(np.log(K), np.log(np.maximum(y, 1e-12)), 1)
    p0 = (float(np.exp(icpt)), float(np.clip(slope, 0.0, 5.0)), 0.0)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OptimizeWarning)
            (a, p, b), _ = curve_fit(_power, K, y, p0=p0, bounds=([0.0, 0.0, -np.inf], [np.inf, 5.0, np.inf]),
                                     maxfev=20000)
    except (RuntimeError, ValueError):
        a, p, b = p0
    return float(a), float(p), float(b)


def run_scaling(cfg: ExperimentConfig) -> StudyResult:
    res = _run_study(cfg, "scaling")
    if len({r.K for r in res.rows}) >= 3:
        K = res.column("K")
        _, res.fits["p1_exponent"], _ = fit_power_law(K, res.column("p1_time"))
        _, res.fits["pipeline_exponent"], _ = fit_power_law(K, res.column("sinkhorn_time") + res.column("p3_time"))
    return res


def run_sensitivity(cfg: ExperimentConfig) -> StudyResult:
    return _run_study(cfg, "sensitivity")


def run_cost_vs_kept(cfg: ExperimentConfig) -> StudyResult:
    return _run_study(cfg, "kept")


def run_nonuniform(cfg: ExperimentConfig) -> StudyResult:
    return _run_study(replace(cfg, costs="nonuniform"), "nonuniform")


def mean_by(res: StudyResult, key: str, value: str) -> dict[float, float]:
    groups: dict[float, list[float]] = {}
    for r in res.rows:
        groups.setdefault(getattr(r, key), []).append(getattr(r, value))
    return {k: float(np.mean(v)) for k, v in sorted(groups.items())}


def write_csv(rows: Sequence[MetricsRow], path: str | Path, include_wall: bool = True) -> None:
    cols = HEADER if include_wall else [c for c in HEADER if c not in WALL_COLUMNS]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            d = asdict(r)
            w.writerow([_cell(d[c]) for c in cols])


def _cell(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(round(x, 9))
    return str(x)


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


STUDIES = {
    "scaling": run_scaling,
    "sensitivity": run_sensitivity,
    "kept": run_cost_vs_kept,
    "nonuniform": run_nonuniform,
}


def run_study(cfg: ExperimentConfig, study: str) -> StudyResult:
    """Run a study and, with ``out_dir`` set, write CSV, manifest and plots."""
    res = STUDIES[study](cfg)
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(res.rows, out / f"{study}.csv")
        write_csv(res.rows, out / f"{study}_nowall.csv", include_wall=False)
        manifest = {
            "study": study,
            # out_dir is left out so the manifest is the same wherever the study is written
            "config": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(cfg).items() if k != "out_dir"},
            "csv": f"{study}.csv",
            "fits": res.fits,
            "failures": res.failures,
            "rows": [{"row": n, **meta} for n, meta in enumerate(res.keys)],
        }
        (out / f"{study}_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                                    encoding="utf-8")
        _plots(study, res, out)
    return res


def _plots(study: str, res: StudyResult, out: Path) -> None:
    if not res.rows:
        return
    if study in ("scaling", "nonuniform"):
        times = {
            "P1": (res.column("K"), res.column("p1_time")),
            "pipeline": (res.column("K"), res.column("sinkhorn_time") + res.column("p3_time")),
        }
        emit_plot("metrics", out / f"{study}_time.svg", series=times, xlabel="K", ylabel="seconds",
                  logx=True, logy=True)
        gaps = mean_by(res, "K", "gap_pct")
        emit_plot("metrics", out / f"{study}_gap.svg", series={"gap %": (list(gaps), list(gaps.values()))},
                  xlabel="K", ylabel="gap %")
    elif study == "sensitivity":
        series = {}
        for lam in sorted({r.lam for r in res.rows}):
            sub = StudyResult([r for r in res.rows if r.lam == lam], [])
            m = mean_by(sub, "epsilon", "gap_pct")
            series[f"lambda={lam:g}"] = (list(m), list(m.values()))
        emit_plot("metrics", out / "sensitivity_gap.svg", series=series, xlabel="epsilon", ylabel="gap %", logx=True)
        sw = mean_by(res, "epsilon", "sweeps")
        emit_plot("metrics", out / "sensitivity_sweeps.svg", series={"sweeps": (list(sw), list(sw.values()))},
                  xlabel="epsilon", ylabel="sweeps", logx=True)
    elif study == "kept":
        series = {}
        for K in sorted({r.K for r in res.rows}):
            sub = [r for r in res.rows if r.K == K]
            series[f"K={K}"] = ([r.kept_pct for r in sub], [r.gap_pct for r in sub])
        emit_plot("metrics", out / "kept_gap.svg", series=series, xlabel="edges kept %", ylabel="gap %")
