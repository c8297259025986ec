"""Command-line front end: single runs, baselines, parameter sweeps, validation.

Exit codes: 0 success, 2 usage error, 3 config or validation error,
4 solver failure.  All artifacts are CSV; files are written atomically and
the pipeline is deterministic, so repeated runs reproduce results (the
wall-clock column aside) byte for byte.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import multiprocessing
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

from . import planner
from .power_opt import PowerOptimizationError
from .scenario import (ConfigError, Scenario, ScenarioValidationError,
                       load_scenario, validate, with_eve_uncertainty, with_horizon)
from .trajectory_opt import TrajectoryOptimizationError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_SOLVER = 4

_SWEEP_PARAMS = ("horizon_s", "eve_eps_m")


@dataclass(frozen=True)
class SweepSpec:
    """One sweep request: base scenario, swept parameter, values, schemes."""

    base: Scenario
    param: str                       # "horizon_s" or "eve_eps_m"
    values: tuple
    schemes: tuple
    out_dir: Path

    def usage_errors(self) -> list:
        errs = []
        if self.param not in _SWEEP_PARAMS:
            errs.append(f"unknown sweep parameter {self.param!r}")
        if not self.values:
            errs.append("empty value list")
        unknown = [sch for sch in self.schemes if sch not in planner.SCHEMES]
        if unknown or not self.schemes:
            errs.append(f"unknown scheme(s) {unknown}")
        return errs

    def scenario_at(self, value: float) -> Scenario:
        s = (with_horizon(self.base, value) if self.param == "horizon_s"
             else with_eve_uncertainty(self.base, value))
        report = validate(s)
        if not report.ok:
            raise ScenarioValidationError(report)
        return s


def _fmt(x) -> str:
    return repr(float(x))


def _write_atomic(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_trajectory_csv(plan: planner.Plan, s: Scenario, path: Path) -> None:
    """Per-slot paths, powers, and rates; slots 0 and N+1 carry no power/rate."""
    lines = ["slot,q1x,q1y,q2x,q2y,p1_w,p2_w,r0,re_ub,rbar,rtilde"]
    wp1, wp2 = plan.trajectory.waypoints_tx, plan.trajectory.waypoints_jam
    for n in range(s.num_slots + 2):
        row = [str(n), _fmt(wp1[n, 0]), _fmt(wp1[n, 1]), _fmt(wp2[n, 0]), _fmt(wp2[n, 1])]
        if 1 <= n <= s.num_slots:
            k = n - 1
            row += [_fmt(plan.power.p_tx[k]), _fmt(plan.power.p_jam[k]),
                    _fmt(plan.r0[k]), _fmt(plan.re_ub[k]),
                    _fmt(plan.rbar[k]), _fmt(plan.rtilde[k])]
        else:
            row += ["", "", "", "", "", ""]
        lines.append(",".join(row))
    _write_atomic(path, "\n".join(lines) + "\n")


def write_summary_csv(plan: planner.Plan, s: Scenario, path: Path) -> None:
    lines = ["scheme,horizon_s,eps_m,avg_rbar,avg_rtilde,outer_rounds,wall_ms",
             ",".join([plan.scheme, _fmt(s.horizon), _fmt(s.eve_uncertainty),
                       _fmt(plan.avg_rbar), _fmt(plan.avg_rtilde),
                       str(plan.outer_rounds), _fmt(plan.wall_ms)])]
    _write_atomic(path, "\n".join(lines) + "\n")


def write_convergence_csv(plan: planner.Plan, path: Path) -> None:
    lines = ["round,phase,inner_iter,objective"]
    for row in plan.trace:
        lines.append(f"{row.round},{row.phase},{row.inner_iter},{_fmt(row.objective)}")
    _write_atomic(path, "\n".join(lines) + "\n")


def write_plan(plan: planner.Plan, s: Scenario, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(plan, s, out_dir / "trajectory.csv")
    write_summary_csv(plan, s, out_dir / "summary.csv")
    write_convergence_csv(plan, out_dir / "convergence.csv")


def _load_with_overrides(args) -> Scenario:
    s = load_scenario(args.config)
    if getattr(args, "horizon_override", None) is not None:
        s = with_horizon(s, args.horizon_override)
    if getattr(args, "eps_override", None) is not None:
        s = with_eve_uncertainty(s, args.eps_override)
    report = validate(s)
    if not report.ok:
        raise ScenarioValidationError(report)
    return s


def _run_scheme(s: Scenario, scheme: str) -> planner.Plan:
    if scheme == "proposed":
        return planner.optimize(s)
    return planner.baseline(s, scheme)


def cmd_optimize(args) -> int:
    s = _load_with_overrides(args)
    plan = _run_scheme(s, args.scheme)
    write_plan(plan, s, Path(args.out))
    print(f"{args.scheme}: avg_rbar={plan.avg_rbar:.6f} bps/Hz, "
          f"avg_rtilde={plan.avg_rtilde:.6f} bps/Hz, "
          f"rounds={plan.outer_rounds}, out={args.out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        s = load_scenario(args.config)
    except ScenarioValidationError as exc:
        print(exc.report)
        return EXIT_CONFIG
    print(validate(s))
    return EXIT_OK


def _sweep_point(s: Scenario, scheme: str, out_dir: str):
    plan = _run_scheme(s, scheme)
    write_plan(plan, s, Path(out_dir))
    return {"scheme": scheme, "horizon_s": s.horizon, "eps_m": s.eve_uncertainty,
            "avg_rbar": plan.avg_rbar, "avg_rtilde": plan.avg_rtilde,
            "outer_rounds": plan.outer_rounds, "wall_ms": plan.wall_ms,
            "status": "ok"}


def run_sweep(spec: SweepSpec, jobs: int = 1):
    """Execute one sweep; returns (rows, n_ok).

    Each (scheme, value) point writes its own artifact directory; failed
    points are recorded with a status and do not abort the remaining ones.
    """
    rows = []
    runnable = []
    for value in spec.values:
        try:
            s = spec.scenario_at(value)
        except (ConfigError, ScenarioValidationError) as exc:
            for scheme in spec.schemes:
                rows.append(((value, scheme),
                             {"scheme": scheme, "status": f"config_error: {exc}"}))
            continue
        for scheme in spec.schemes:
            sub = spec.out_dir / f"{spec.param}_{value:g}_{scheme}"
            runnable.append(((value, scheme), s, scheme, str(sub)))

    if jobs <= 1:
        for key, s, scheme, sub in runnable:
            try:
                rows.append((key, _sweep_point(s, scheme, sub)))
            except (PowerOptimizationError, TrajectoryOptimizationError) as exc:
                rows.append((key, {"scheme": scheme,
                                   "status": f"solver_error: {exc}"}))
    else:
        # spawn keeps forked numba/BLAS state out of the workers
        ctx = multiprocessing.get_context("spawn")
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs,
                                                    mp_context=ctx) as pool:
            futures = {pool.submit(_sweep_point, s, scheme, sub): (key, scheme)
                       for key, s, scheme, sub in runnable}
            for fut, (key, scheme) in futures.items():
                try:
                    rows.append((key, fut.result()))
                except (PowerOptimizationError, TrajectoryOptimizationError) as exc:
                    rows.append((key, {"scheme": scheme,
                                       "status": f"solver_error: {exc}"}))
    rows.sort(key=lambda item: (item[0][0], item[0][1]))
    n_ok = sum(1 for _, r in rows if r.get("status") == "ok")
    return rows, n_ok


def write_sweep_csv(spec: SweepSpec, rows, path: Path) -> None:
    lines = ["scheme,swept_param,swept_value,horizon_s,eps_m,avg_rbar,avg_rtilde,"
             "outer_rounds,wall_ms,status"]
    for (value, scheme), r in rows:
        if r.get("status") == "ok":
            lines.append(",".join([scheme, spec.param, _fmt(value),
                                   _fmt(r["horizon_s"]), _fmt(r["eps_m"]),
                                   _fmt(r["avg_rbar"]), _fmt(r["avg_rtilde"]),
                                   str(r["outer_rounds"]), _fmt(r["wall_ms"]), "ok"]))
        else:
            status = r.get("status", "error").split("\n")[0].replace(",", ";")
            lines.append(",".join([scheme, spec.param, _fmt(value),
                                   "", "", "", "", "", "", status]))
    _write_atomic(path, "\n".join(lines) + "\n")


def cmd_sweep(args) -> int:
    base = _load_with_overrides(args)
    try:
        values = tuple(float(v) for v in args.values.split(",") if v.strip() != "")
    except ValueError:
        print(f"sweep: values must be numbers, got {args.values!r}", file=sys.stderr)
        return EXIT_USAGE
    spec = SweepSpec(base=base, param=args.sweep_param, values=values,
                     schemes=tuple(sch.strip() for sch in args.scheme.split(",")
                                   if sch.strip()),
                     out_dir=Path(args.out))
    errs = spec.usage_errors()
    if errs:
        print("sweep: " + "; ".join(errs), file=sys.stderr)
        return EXIT_USAGE
    rows, n_ok = run_sweep(spec, jobs=max(1, args.jobs))
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(spec, rows, spec.out_dir / "sweep.csv")
    print(f"sweep: {n_ok}/{len(rows)} points ok, results in "
          f"{spec.out_dir / 'sweep.csv'}")
    return EXIT_OK if n_ok == len(rows) else EXIT_SOLVER


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uavsec",
        description="Worst-case secrecy-rate planner for a two-UAV "
                    "transmitter/jammer team.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, need_out=True):
        p.add_argument("--config", required=True, help="scenario config file")
        p.add_argument("--eps-override", type=float, default=None,
                       help="override the eavesdropper uncertainty radius (m)")
        p.add_argument("--horizon-override", type=float, default=None,
                       help="override the mission duration (s)")
        if need_out:
            p.add_argument("--out", required=True, help="output directory")

    p_opt = sub.add_parser("optimize", help="run one scheme and write CSVs")
    add_common(p_opt)
    p_opt.add_argument("--scheme", default="proposed", choices=planner.SCHEMES)
    p_opt.set_defaults(func=cmd_optimize)

    p_base = sub.add_parser("baseline", help="run a fly-hover-fly baseline")
    add_common(p_base)
    p_base.add_argument("--scheme", required=True,
                        choices=("fhf_constant", "fhf_adaptive"))
    p_base.set_defaults(func=cmd_optimize)

    p_sweep = sub.add_parser("sweep", help="sweep one parameter over schemes")
    add_common(p_sweep)
    p_sweep.add_argument("--sweep-param", required=True, choices=_SWEEP_PARAMS)
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated list, e.g. 102,104,200")
    p_sweep.add_argument("--scheme", default=",".join(planner.SCHEMES),
                         help="comma-separated scheme list")
    p_sweep.add_argument("--jobs", type=int, default=1,
                         help="parallel worker processes")
    p_sweep.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser("validate", help="check a config file")
    p_val.add_argument("--config", required=True)
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ScenarioValidationError as exc:
        print(f"validation error:\n{exc.report}", file=sys.stderr)
        return EXIT_CONFIG
    except (PowerOptimizationError, TrajectoryOptimizationError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
