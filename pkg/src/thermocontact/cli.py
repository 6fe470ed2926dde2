"""Command line interface.

    thermocontact run   --config FILE [--out DIR] [--override section.key=value ...]
    thermocontact study --config FILE [--out DIR] [--override ...]

Exit codes: 0 ok, 2 configuration error, 3 solver nonconvergence,
4 I/O error.  Errors are also reported as one JSON line on stderr.
"""

from __future__ import annotations

import argparse
import collections
import json
import os
import sys

from .config import Config, build_scenario, load_config, parse_config
from .diagnostics import REPORT_COLUMNS
from .errors import ConfigError, LinearSolveFailure, NoConvergence
from .output import TRAJECTORY_COLUMNS, CsvSeries, trajectory_row, write_contact_vtk, write_manifest, write_vtk
from .stepper import Simulator
from .study import run_study

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4


def run_scenario(cfg: Config, out_dir: str | None = None, echo=print) -> int:
    """Run one scenario and write ``trajectory.csv``, ``reports.csv`` (+ VTK)."""
    out_dir = out_dir or cfg.out_dir
    scenario = build_scenario(cfg)
    os.makedirs(out_dir, exist_ok=True)
    sim = Simulator(scenario)
    hist = collections.Counter()
    worst = {"box_violation": 0.0, "max_penetration": 0.0, "abs_lyapunov_residual": 0.0,
             "min_positivity_slack": float("inf")}
    last = {}

    with CsvSeries(os.path.join(out_dir, "trajectory.csv"), TRAJECTORY_COLUMNS) as traj, \
            CsvSeries(os.path.join(out_dir, "reports.csv"), REPORT_COLUMNS) as reps:

        def record(old, new, rep):
            traj.write(trajectory_row(sim, new))
            reps.write(rep.row())
            if old is not None:
                hist[new.fp_iters] += 1
            worst["box_violation"] = max(worst["box_violation"], rep.box_violation)
            worst["max_penetration"] = max(worst["max_penetration"], rep.max_penetration)
            worst["abs_lyapunov_residual"] = max(worst["abs_lyapunov_residual"], abs(rep.lyapunov_residual))
            worst["min_positivity_slack"] = min(worst["min_positivity_slack"], rep.positivity_slack,
                                                rep.positivity_slack_s)
            last.update(psi_omega=rep.psi_omega, psi_gammac=rep.psi_gammac, lyapunov=rep.lyapunov)
            if cfg.emit_vtk and new.step % cfg.vtk_every == 0:
                write_vtk(sim, new, os.path.join(out_dir, f"bulk_{new.step:05d}.vtk"))
                write_contact_vtk(sim, new, os.path.join(out_dir, f"contact_{new.step:05d}.vtk"))

        from .diagnostics import report

        state = sim.build_initial_data()
        record(None, state, report(sim, None, state))

        def callback(_sim, old, new):
            record(old, new, report(sim, old, new))

        sim.run(initial=state, keep_states=False, reports=False, callback=callback)

    summary = {
        "scenario": scenario.name,
        "steps": scenario.solver.n_steps,
        "final": last,
        "worst": worst,
        "fp_iteration_histogram": dict(sorted(hist.items())),
    }
    write_manifest(out_dir, {"summary": summary, "config": cfg.__dict__})
    echo(
        f"{scenario.name}: {summary['steps']} steps | "
        f"psi_omega={last['psi_omega']:.6g} psi_gammac={last['psi_gammac']:.6g} L={last['lyapunov']:.6g} | "
        f"box={worst['box_violation']:.1e} pen={worst['max_penetration']:.1e} "
        f"|res|={worst['abs_lyapunov_residual']:.1e} slack={worst['min_positivity_slack']:.3g} | "
        f"fp iters {dict(sorted(hist.items()))}"
    )
    return EXIT_OK


def run_study_cmd(cfg: Config, out_dir: str | None = None, echo=print) -> int:
    if cfg.study_axis is None:
        raise ConfigError("the study command needs a [study] section with axis and levels")
    out_dir = out_dir or cfg.out_dir
    scenario = build_scenario(cfg)
    os.makedirs(out_dir, exist_ok=True)
    res = run_study(scenario, cfg.study_axis, cfg.study_levels, log=echo)
    res.write_csv(os.path.join(out_dir, "study.csv"))
    if res.differences:
        d = ", ".join(f"{row['total']:.3e}" for row in res.differences)
        echo(f"consecutive differences ({cfg.study_axis}): {d} -> "
             f"{'strictly decreasing' if res.decreasing() else 'NOT decreasing'}")
    for name, vals in res.orders.items():
        echo(f"observed orders {name}: " + ", ".join(f"{v:.3f}" for v in vals))
    if res.failures:
        first = min(res.failures)
        raise NoConvergence(f"study level {res.levels[first]} failed: {res.failures[first]}")
    return EXIT_OK


def _error(code: int, exc: BaseException) -> int:
    rec = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(rec), file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thermocontact", description="Thermal adhesive contact simulator")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run one scenario"), ("study", "run a convergence study")):
        sp_ = sub.add_parser(name, help=help_)
        sp_.add_argument("--config", help="INI configuration file (defaults: reference preset)")
        sp_.add_argument("--out", help="output directory (overrides [output] dir)")
        sp_.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
                         help="override one configuration value; may be repeated")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            cfg = load_config(args.config, args.override)
        else:
            cfg = parse_config("", args.override)
        if args.command == "run":
            return run_scenario(cfg, args.out)
        return run_study_cmd(cfg, args.out)
    except ConfigError as exc:
        return _error(EXIT_CONFIG, exc)
    except (NoConvergence, LinearSolveFailure) as exc:
        return _error(EXIT_SOLVER, exc)
    except OSError as exc:
        return _error(EXIT_IO, exc)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
