"""Command-line interface.

Exit codes: 0 success, 1 verification failed, 2 usage error, 3 infeasible,
4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__, bench, sinkhorn
from . import instance as inst_mod
from .errors import ConservationViolation, DimensionMismatch, Infeasible, MapfError, NonIntegralFlow, ParseError
from .exact import min_makespan_search, solve_makespan_exponential, solve_p1
from .instance import NonUniformRandom, generate_grid, validate
from .plan import load_plan, save_plan
from .plot import emit_plot
from .project import KeepFraction, P3Params, Threshold, solve_p3
from .timeexp import build
from .verify import check_plan

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 1, 2, 3, 4
OUT_ENV = "MAPFOT_OUT_DIR"


def _emit(args, payload: dict, text: str | None = None) -> None:
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        print(text if text is not None else json.dumps(payload, indent=2, sort_keys=True))


def _out(args, name: str) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    return Path(os.environ.get(OUT_ENV, ".")) / name


def _load(args):
    inst = inst_mod.load(args.instance)
    if getattr(args, "horizon", None) is not None:
        inst = inst.with_horizon(args.horizon)
    return inst


def cmd_gen(args) -> int:
    costs = NonUniformRandom(args.seed) if args.costs == "nonuniform" else None
    inst = generate_grid(args.width, args.height or args.width, args.obstacles, args.robots, args.seed,
                         horizon=args.horizon, costs=costs)
    path = _out(args, "instance.json")
    inst_mod.save(inst, path)
    _emit(args, {"instance": str(path), "K": inst.n_vertices, "N": len(inst.robots), "edges": inst.n_edges})
    return EXIT_OK


def cmd_validate(args) -> int:
    inst = _load(args)
    rep = validate(inst)
    _emit(args, rep.to_dict())
    return EXIT_OK if rep.ok else EXIT_FAIL


def _plan_out(args, plan, report, default: str) -> dict:
    path = _out(args, default)
    save_plan(plan, path, cost=float(report.cost))
    return {"plan": str(path), **report.to_dict()}


def cmd_solve(args) -> int:
    inst = _load(args)
    if args.dump_network:
        Path(args.dump_network).write_text(build(inst).dump(), encoding="utf-8")
    plan, report = solve_p1(inst, backend=args.backend)
    _emit(args, _plan_out(args, plan, report, "plan.json"))
    return EXIT_OK


def cmd_makespan(args) -> int:
    inst = _load(args)
    if args.mode == "search":
        T, plan = min_makespan_search(inst)
        payload = {"mode": "search", "T_star": T, "makespan": plan.makespan}
        save_plan(plan, _out(args, "makespan_plan.json"))
    else:
        plan, report = solve_makespan_exponential(inst, args.horizon)
        payload = {"mode": "exponential", "makespan": plan.makespan, "B": report.extra["B"],
                   "horizon": report.horizon}
        save_plan(plan, _out(args, "makespan_plan.json"))
    _emit(args, payload)
    return EXIT_OK


def _shadow(args, inst):
    stab = {"auto": None, "on": True, "off": False}[args.stabilized]
    return sinkhorn.run(inst, inst.horizon, args.epsilon, args.damping, args.sweeps, args.tol, stab,
                        boundary=args.boundary)


def cmd_shadow(args) -> int:
    inst = _load(args)
    sh = _shadow(args, inst)
    path = _out(args, "shadow.json")
    sinkhorn.save_shadow(sh, path, trace_path=path.with_suffix(".trace.csv"))
    _emit(args, {"shadow": str(path), "trace": str(path.with_suffix(".trace.csv")), **sh.summary()})
    return EXIT_OK


def cmd_pipeline(args) -> int:
    inst = _load(args)
    sh = _shadow(args, inst)
    policy = Threshold(args.prune_threshold) if args.prune_threshold is not None else KeepFraction(args.keep)
    params = P3Params(lam=args.lam, delta=args.delta, policy=policy)
    p1_cost = None
    if args.compare:
        _, r1 = solve_p1(inst)
        p1_cost = r1.cost_scaled
    plan, report, mask = solve_p3(inst, sh, params, p1_cost=p1_cost)
    out = _out(args, "pipeline_plan.json")
    save_plan(plan, out, cost=float(report.cost))
    stem = out.with_suffix("")
    sinkhorn.save_shadow(sh, f"{stem}.shadow.json", trace_path=f"{stem}.trace.csv")
    mask.save(inst, f"{stem}.mask.json")
    payload = {"plan": str(out), "shadow": f"{stem}.shadow.json", "mask": f"{stem}.mask.json",
               **report.to_dict(), "sweeps": sh.sweeps, "residual": sh.residual}
    _emit(args, payload)
    return EXIT_OK


def cmd_verify(args) -> int:
    inst = inst_mod.load(args.instance)
    plan = load_plan(inst, args.plan)
    rep = check_plan(inst, plan)
    if args.report:
        rep.save(args.report)
    _emit(args, rep.to_dict())
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_bench(args) -> int:
    cfg = bench.ExperimentConfig(
        grid_sizes=tuple(args.sizes), density=args.density, horizon=args.horizon,
        epsilons=tuple(args.epsilons), lambdas=tuple(args.lambdas), keep=args.keep,
        keep_fractions=tuple(args.keeps), repetitions=args.reps, seed=args.seed, max_sweeps=args.sweeps,
        tol=args.tol, workers=args.workers, out_dir=str(_out(args, "bench")), save_artifacts=args.artifacts)
    res = bench.run_study(cfg, args.study)
    _emit(args, {"study": args.study, "rows": len(res.rows), "fits": res.fits, "failures": res.failures,
                 "out_dir": cfg.out_dir})
    return EXIT_OK


def cmd_plot(args) -> int:
    inst = inst_mod.load(args.instance)
    path = _out(args, f"{args.kind}.svg")
    if args.kind == "trajectories":
        plan = load_plan(inst, args.plan) if args.plan else None
        emit_plot("trajectories", path, instance=inst, plan=plan)
    else:
        if not args.shadow:
            return _usage("plot --kind shadow needs --shadow")
        sh = sinkhorn.load_shadow(inst, args.shadow)
        emit_plot("shadow", path, instance=inst, slices=sh.slices)
    _emit(args, {"svg": str(path)})
    return EXIT_OK


def _usage(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_USAGE


def _sinkhorn_flags(p):
    p.add_argument("--epsilon", type=float, default=0.2, help="entropic temperature (default 0.2)")
    p.add_argument("--damping", type=float, default=1.0, help="gluing damping exponent in (0,1] (default 1)")
    p.add_argument("--sweeps", type=int, default=1000, help="maximum Sinkhorn sweeps (default 1000)")
    p.add_argument("--tol", type=float, default=1e-3, help="trailing-20 relative stall tolerance (default 1e-3)")
    p.add_argument("--stabilized", choices=["auto", "on", "off"], default="auto",
                   help="log-domain sweeps: auto engages below epsilon 0.15 (default auto)")
    p.add_argument("--boundary", choices=["keep", "strict"], default="keep",
                   help="off-support boundary scalings: keep (default) or zero them")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mapfot", description="Anonymous MAPF via Markovian optimal transport.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable JSON on stdout (default off)")
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--out", default=None, help=f"output file or directory (default: ${OUT_ENV} or cwd)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate a random grid instance")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, default=None, help="default: width")
    p.add_argument("--obstacles", type=int, default=0)
    p.add_argument("--robots", type=int, required=True)
    p.add_argument("--horizon", type=int, default=30)
    p.add_argument("--costs", choices=["uniform", "nonuniform"], default="uniform")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("validate", parents=[common], help="check an instance file")
    p.add_argument("instance")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", parents=[common], help="exact min-cost plan")
    p.add_argument("instance")
    p.add_argument("--horizon", type=int, default=None, help="override the instance horizon")
    p.add_argument("--backend", choices=["auto", "numba", "python"], default="auto")
    p.add_argument("--dump-network", default=None, metavar="PATH", help="write the time-expanded edge list")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("makespan", parents=[common], help="minimum makespan")
    p.add_argument("instance")
    p.add_argument("--mode", choices=["search", "exponential"], default="search")
    p.add_argument("--horizon", type=int, default=None, help="horizon for the exponential mode")
    p.set_defaults(func=cmd_makespan)

    p = sub.add_parser("shadow", parents=[common], help="entropic shadow transport")
    p.add_argument("instance")
    p.add_argument("--horizon", type=int, default=None)
    _sinkhorn_flags(p)
    p.set_defaults(func=cmd_shadow)

    p = sub.add_parser("pipeline", parents=[common], help="shadow, prune and integral re-solve")
    p.add_argument("instance")
    p.add_argument("--horizon", type=int, default=None)
    _sinkhorn_flags(p)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0, help="shadow bias weight (default 0)")
    p.add_argument("--delta", type=float, default=1e-6, help="log guard (default 1e-6)")
    p.add_argument("--keep", type=float, default=0.4, help="kept fraction per slice (default 0.4)")
    p.add_argument("--prune-threshold", type=float, default=None, help="absolute mass threshold instead of --keep")
    p.add_argument("--compare", action="store_true", help="also solve exactly and report the gap")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("verify", parents=[common], help="audit a plan; exit 1 on failure")
    p.add_argument("instance")
    p.add_argument("plan")
    p.add_argument("--report", default=None, help="write the JSON report here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", parents=[common], help="run an experiment study")
    p.add_argument("--study", choices=sorted(bench.STUDIES), required=True)
    p.add_argument("--sizes", type=int, nargs="+", default=[20, 30, 40], help="grid widths")
    p.add_argument("--density", type=float, default=0.05)
    p.add_argument("--horizon", type=int, default=30)
    p.add_argument("--epsilons", type=float, nargs="+", default=[0.2])
    p.add_argument("--lambdas", type=float, nargs="+", default=[0.0])
    p.add_argument("--keep", type=float, default=0.4)
    p.add_argument("--keeps", type=float, nargs="+", default=[0.3, 0.4, 0.5, 0.6, 0.8, 1.0])
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--sweeps", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--artifacts", action="store_true", help="save instances, plans and masks")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("plot", parents=[common], help="render an SVG")
    p.add_argument("instance")
    p.add_argument("--kind", choices=["trajectories", "shadow"], default="trajectories")
    p.add_argument("--plan", default=None)
    p.add_argument("--shadow", default=None)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConservationViolation, NonIntegralFlow, AssertionError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (ParseError, DimensionMismatch, MapfError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
