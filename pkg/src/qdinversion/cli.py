"""``qdinv`` command-line entry point.

Every command writes plot-ready CSV files into ``--out`` together with a JSON
provenance sidecar.  Exit codes: 0 success, 2 configuration error, 3 numerical
failure (rows are still written, with the failure recorded per row).
"""
from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from . import figures
from .config import ConfigError, RunConfig, load_config
from .io import CSV_SCHEMA_VERSION, write_csv, write_json
from .liouvillian import build_liouvillian, compute_rates
from .phonon_bath import ConvergenceWarning
from .solver import SteadyStateError, steady_state, truncation_certify
from .sweep import WORKERS_ENV, Axis, SweepPlan, default_workers, laser_axis, run_sweep
from .trajectory import ensemble_average, run_trajectory

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def parse_axis(spec: str) -> Axis:
    """``name=min:max:step`` or ``name=v1,v2,...``."""
    if "=" not in spec:
        raise ConfigError(f"axis {spec!r} must look like name=min:max:step or name=v1,v2")
    name, body = (s.strip() for s in spec.split("=", 1))
    try:
        if ":" in body:
            lo, hi, step = (float(x) for x in body.split(":"))
            return Axis.linspace(name, lo, hi, step)
        return Axis.of(name, [float(x) for x in body.split(",") if x.strip()])
    except ValueError as exc:
        raise ConfigError(f"axis {spec!r}: {exc}") from exc


def _csv_list(raw: str, cast=float) -> list:
    try:
        return [cast(x) for x in raw.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse list {raw!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="INI file with [bath] [system] [sweep] [trajectory]")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value (repeatable)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--workers", type=int, default=None,
                        help=f"worker processes (default: ${WORKERS_ENV} or all CPUs)")
    common.add_argument("--preview", action="store_true", help="coarse 0.05 meV laser step")

    p = _Parser(prog="qdinv", description="Phonon-assisted inversion in a driven QD-cavity.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("rates", parents=[common], help="phonon scattering rates vs detuning")
    r.add_argument("--t-list", default="4,10", help="temperatures in K")
    r.add_argument("--dmin", type=float, default=-4.0)
    r.add_argument("--dmax", type=float, default=4.0)
    r.add_argument("--step", type=float, default=0.01)
    r.add_argument("--coupling", type=float, default=0.1, help="coupling in meV")

    c = sub.add_parser("correlation", parents=[common], help="phonon correlation function")
    c.add_argument("--t-list", default="4,10")
    c.add_argument("--t-max", type=float, default=5.0)
    c.add_argument("--step", type=float, default=0.01)

    sub.add_parser("steady", parents=[common], help="steady state at one parameter point")

    s = sub.add_parser("sweep", parents=[common], help="free-form steady-state sweep")
    s.add_argument("--axis", action="append", default=[], metavar="NAME=MIN:MAX:STEP",
                   help="sweep axis (repeatable); default is the laser axis")
    s.add_argument("--paired", action="store_true", help="phonons on and off at every point")

    t = sub.add_parser("trajectory", parents=[common], help="quantum trajectory record(s)")
    t.add_argument("--seed", type=int)
    t.add_argument("--n-traj", type=int)
    t.add_argument("--t-final", type=float)
    t.add_argument("--dt", type=float)

    f = sub.add_parser("figure", parents=[common], help="figure preset bundle")
    f.add_argument("name")

    ct = sub.add_parser("certify-truncation", parents=[common], help="Fock-cap convergence")
    ct.add_argument("--n-list", default="20,40,60,70")
    ct.add_argument("--tol", type=float, default=1e-3)
    return p


def _provenance(rc: RunConfig, out: Path, files, **extra) -> None:
    write_json(out / f"{rc.command}.provenance.json",
               rc.provenance(csv_schema=CSV_SCHEMA_VERSION, workers=rc.workers,
                             files=sorted(str(Path(f).name) for f in files), **extra))


def cmd_rates(args, rc: RunConfig, out: Path) -> int:
    temps = _csv_list(args.t_list)
    rows = figures.rates_table(rc.bath_params(), temps, args.dmin, args.dmax, args.step,
                               args.coupling)
    path = write_csv(out / "rates.csv", figures.RATES_HEADER, rows)
    _provenance(rc, out, [path], temperatures=temps, coupling_meV=args.coupling,
                grid={"dmin": args.dmin, "dmax": args.dmax, "step": args.step})
    return EXIT_OK


def cmd_correlation(args, rc: RunConfig, out: Path) -> int:
    temps = _csv_list(args.t_list)
    rows = figures.correlation_table(rc.bath_params(), temps, args.t_max, args.step)
    path = write_csv(out / "correlation.csv", figures.CORRELATION_HEADER, rows)
    _provenance(rc, out, [path], temperatures=temps, t_max_ps=args.t_max, step_ps=args.step)
    return EXIT_OK


def cmd_steady(args, rc: RunConfig, out: Path) -> int:
    cfg, bath = rc.system_config(), rc.bath_params()
    cfg = cfg.effective(bath)
    rates = compute_rates(cfg, bath)
    L = build_liouvillian(cfg, rates)
    row = {"n_x": np.nan, "n_c": np.nan, "residual": np.nan, "error": ""}
    code = EXIT_OK
    meta = {}
    try:
        res = steady_state(L, condition=True)
        row.update(n_x=res.n_x, n_c=res.n_c, residual=res.residual)
        meta = res.metadata
    except SteadyStateError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        code = EXIT_NUMERIC
    row.update(rates.as_dict())
    header = ["n_x", "n_c", "gamma_up_cav_ueV", "gamma_down_cav_ueV", "gamma_up_x_ueV",
              "gamma_down_x_ueV", "mean_displacement", "residual", "error"]
    path = write_csv(out / "steady.csv", header, [row])
    _provenance(rc, out, [path], liouvillian=L.provenance(), solver=meta)
    print(f"n_x = {row['n_x']:.6f}  n_c = {row['n_c']:.6f}  residual = {row['residual']:.2e}")
    return code


def _sweep_axes(args, rc: RunConfig) -> list:
    specs = list(args.axis)
    if not specs and rc.sweep.get("axes"):
        specs = [s for s in rc.sweep["axes"].split(";") if s.strip()]
    if specs:
        return [parse_axis(s) for s in specs]
    return [laser_axis(rc.system["delta_cx"], figures._step(rc))]


def cmd_sweep(args, rc: RunConfig, out: Path) -> int:
    axes = _sweep_axes(args, rc)
    fixed = {k: v for k, v in rc.system_point().items()
             if k not in {ax.name for ax in axes}}
    paired = args.paired or bool(rc.sweep.get("paired"))
    if paired:
        fixed.pop("phonons_enabled", None)
    scenario = rc.sweep.get("scenario", "sweep")
    try:
        plan = SweepPlan(scenario, axes, fixed, paired=paired)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rows = run_sweep(plan, rc.workers)
    path = write_csv(out / f"{scenario}.csv", plan.columns, rows)
    _provenance(rc, out, [path], axes={ax.name: list(ax.values) for ax in axes},
                paired=paired)
    return EXIT_NUMERIC if any(r["error"] for r in rows) else EXIT_OK


def cmd_trajectory(args, rc: RunConfig, out: Path) -> int:
    tr = rc.trajectory
    for key in ("seed", "n_traj", "t_final", "dt"):
        val = getattr(args, key)
        if val is not None:
            tr[key] = val
    cfg, bath = rc.system_config(), rc.bath_params()
    cfg = cfg.effective(bath)
    rates = compute_rates(cfg, bath)
    seed, n_traj = int(tr["seed"]), int(tr["n_traj"])
    stride = int(tr.get("stride", 1))
    files = []
    if n_traj == 1:
        rec = run_trajectory(cfg, rates, seed, float(tr["t_final"]), float(tr["dt"]))
        rec.write(out / "trajectory.csv", stride=stride)
        files += [out / "trajectory.csv", out / "trajectory.jumps.json"]
        extra = {"seeds": [seed], "jump_counts": rec.counts(), "flags": rec.flags}
    else:
        ens = ensemble_average(cfg, rates, n_traj, seed, float(tr["t_final"]),
                               float(tr["dt"]), workers=rc.workers)
        rows = [{"t_ps": t, "n_x": a, "n_c": b, "n_x_se": c, "n_c_se": d}
                for t, a, b, c, d in zip(ens.t, ens.n_x, ens.n_c, ens.n_x_se, ens.n_c_se)]
        files.append(write_csv(out / "ensemble.csv", ["t_ps", "n_x", "n_c", "n_x_se",
                                                      "n_c_se"], rows[::stride]))
        extra = {"seeds": ens.seeds, "jump_counts": ens.jump_counts}
    _provenance(rc, out, files, rates=rates.as_dict(), **extra)
    return EXIT_OK


def cmd_figure(args, rc: RunConfig, out: Path) -> int:
    if args.name not in figures.FIGURES:
        raise ConfigError(f"unknown figure {args.name!r}; choose from "
                          f"{', '.join(figures.FIGURES)}")
    bundle = figures.run_figure(args.name, rc, rc.workers)
    files, seeds, failed = [], [], False
    for panel, content in bundle.items():
        if hasattr(content, "write"):
            csv_path = out / f"{panel}.csv"
            content.write(csv_path, stride=int(rc.trajectory.get("stride", 1)))
            files += [csv_path, csv_path.with_suffix(".jumps.json")]
            seeds.append(content.seed)
        else:
            header, rows = content
            files.append(write_csv(out / f"{panel}.csv", header, rows))
            failed |= any(r.get("error") for r in rows)
    rc.command = f"figure_{args.name}"
    _provenance(rc, out, files, figure=args.name, panels=list(bundle), seeds=seeds)
    return EXIT_NUMERIC if failed else EXIT_OK


def cmd_certify(args, rc: RunConfig, out: Path) -> int:
    n_list = _csv_list(args.n_list, int)
    try:
        report = truncation_certify(rc.system_config(), rc.bath_params(), n_list, args.tol)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    path = write_csv(out / "truncation.csv", ["n_max", "n_x", "n_c", "delta_n_x", "residual"],
                     report.rows)
    _provenance(rc, out, [path], tolerance=args.tol, converged=report.converged,
                converged_at=report.converged_at, flags=report.flags)
    verdict = (f"converged at n_max = {report.converged_at}" if report.converged
               else "NOT converged: " + "; ".join(report.flags))
    print(verdict)
    return EXIT_OK if report.converged else EXIT_NUMERIC


COMMANDS = {
    "rates": cmd_rates, "correlation": cmd_correlation, "steady": cmd_steady,
    "sweep": cmd_sweep, "trajectory": cmd_trajectory, "figure": cmd_figure,
    "certify-truncation": cmd_certify,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        rc = load_config(args.config, args.set, command=args.command, argv=["qdinv", *argv])
        if args.preview:
            rc.sweep["preview"] = True
        rc.workers = args.workers if args.workers is not None else default_workers()
        if rc.workers < 1:
            raise ConfigError("--workers must be >= 1")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with warnings.catch_warnings():
            warnings.simplefilter("always", ConvergenceWarning)
            return COMMANDS[args.command](args, rc, out)
    except ConfigError as exc:
        print(f"qdinv: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SteadyStateError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"qdinv: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
