"""Command-line interface.

Subcommands: forward, optimize, gradcheck, verify.  Each takes
--config <path> (JSON, see the README config reference) and an optional
--out <dir> overriding the config's output directory.  Exit codes:
0 success, 1 usage error, 2 numerical failure, 3 failed verification.
All diagnostics go to standard error; results go to files and stdout.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time as _time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .config import ConfigError, ProblemSpec, load_config
from .forward import solve_forward
from .grid import ScalarField
from .optimizer import gradient_check, optimize
from .output import write_field_vtk, write_series_csv
from .verify import run_verification

__all__ = ["cli_main", "main"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="chemoopt",
        description="Bilinear control of a 2D chemo-repulsion system.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "forward": "run the state solver and write snapshots and series",
        "optimize": "run projected gradient descent and write the report",
        "gradcheck": "compare adjoint and finite-difference derivatives",
        "verify": "run the runtime invariant suite (PASS/FAIL lines)",
    }
    for name, desc in descriptions.items():
        p = sub.add_parser(name, description=desc)
        p.add_argument("--config", required=True, help="JSON problem config")
        p.add_argument("--out", default=None, help="output directory override")
        if name == "forward":
            p.add_argument("--snap-every", type=int, default=None,
                           help="snapshot interval in steps (default n_steps/10)")
    return parser


def _apply_thread_cap():
    cap = os.environ.get("CHEMOOPT_THREADS")
    if cap:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, cap)


def _snapshot_steps(n_steps: int, snap_every: int) -> list:
    steps = list(range(0, n_steps + 1, snap_every))
    if steps[-1] != n_steps:
        steps.append(n_steps)
    return steps


def _run_forward(spec: ProblemSpec, out_dir: Path, snap_every: int | None) -> int:
    from . import plots

    control = spec.build_initial_control()
    traj = solve_forward(spec.params, control)
    n_steps = spec.time.n_steps
    snap = snap_every or spec.snap_every or max(1, n_steps // 10)
    for n in _snapshot_steps(n_steps, snap):
        write_field_vtk(traj.u[n], out_dir / f"u_{n:06d}.vtk", name="u")
        write_field_vtk(traj.v[n], out_dir / f"v_{n:06d}.vtk", name="v")
    times = spec.time.times()
    write_series_csv(
        {"t": times, "mass": traj.mass, "min_u": traj.min_u, "min_v": traj.min_v},
        out_dir / "mass.csv",
    )
    plots.save_fields_figure(
        [traj.u[n_steps], traj.v[n_steps]],
        [f"u at t={spec.time.t_final:g}", f"v at t={spec.time.t_final:g}"],
        out_dir / "fig_state.png",
    )
    plots.save_series_figure(times, {"mass": traj.mass}, out_dir / "fig_mass.png",
                             xlabel="t", ylabel="integral of u")
    plots.save_series_figure(times, {"min_u": traj.min_u, "min_v": traj.min_v},
                             out_dir / "fig_minvals.png", xlabel="t",
                             ylabel="min cell value")
    drift = float(np.abs(traj.mass - traj.mass[0]).max())
    print(f"forward: {n_steps} steps, mass {traj.mass[0]:.12g}, "
          f"max drift {drift:.3e}, outputs in {out_dir}")
    return 0


def _run_optimize(spec: ProblemSpec, out_dir: Path) -> int:
    from . import plots

    start = _time.perf_counter()
    desired, _ = spec.build_desired()
    f_init = spec.build_initial_control()
    report = optimize(spec.params, spec.weights, desired, spec.admissible,
                      f_init, spec.optimizer)
    elapsed = _time.perf_counter() - start

    iters = np.arange(len(report.breakdown_history))
    write_series_csv(
        {
            "iteration": iters,
            "j_total": [b.total for b in report.breakdown_history],
            "j_tracking_u": [b.tracking_u for b in report.breakdown_history],
            "j_tracking_v": [b.tracking_v for b in report.breakdown_history],
            "j_cost_f": [b.cost_f for b in report.breakdown_history],
            "residual": report.residual_history,
            "step_size": report.step_history,
            "infeasibility": report.infeasibility_history,
        },
        out_dir / "convergence.csv",
    )

    n_steps = spec.time.n_steps
    snap = spec.snap_every or max(1, n_steps // 10)
    grid = spec.grid
    for n in range(0, n_steps, snap):
        field = ScalarField(report.control.values[n], grid)
        write_field_vtk(field, out_dir / f"control_{n:06d}.vtk", name="control")
    final_traj = solve_forward(spec.params, report.control)
    write_field_vtk(final_traj.u[n_steps], out_dir / "u_final.vtk", name="u")
    write_field_vtk(final_traj.v[n_steps], out_dir / "v_final.vtk", name="v")

    final = report.breakdown_history[-1]
    summary = {
        "termination": report.termination,
        "iterations": report.iterations,
        "j_initial": report.breakdown_history[0].total,
        "j_final": final.total,
        "j_final_parts": {
            "tracking_u": final.tracking_u,
            "tracking_v": final.tracking_v,
            "cost_f": final.cost_f,
        },
        "residual_final": report.residual_history[-1],
        "options": asdict(report.options),
        "seed": spec.seed,
        "elapsed_seconds": elapsed,
    }
    (out_dir / "report.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    plots.save_series_figure(
        iters,
        {"J": [b.total for b in report.breakdown_history],
         "residual": report.residual_history},
        out_dir / "fig_convergence.png", xlabel="iteration", logy=True,
        title=f"termination: {report.termination}",
    )
    mid = ScalarField(report.control.values[0], grid)
    plots.save_fields_figure(
        [mid, final_traj.u[n_steps]],
        ["control (first interval)", f"u at t={spec.time.t_final:g}"],
        out_dir / "fig_control.png",
    )
    print(f"optimize: {report.termination} after {report.iterations} iterations, "
          f"J {summary['j_initial']:.6e} -> {summary['j_final']:.6e}, "
          f"residual {summary['residual_final']:.3e}, outputs in {out_dir}")
    return 0


def _run_gradcheck(spec: ProblemSpec, out_dir: Path) -> int:
    from . import plots

    desired, _ = spec.build_desired()
    control = spec.build_initial_control()
    report = gradient_check(spec.params, control, spec.weights, desired,
                            spec.gradcheck_directions, list(spec.gradcheck_eps),
                            seed=spec.seed)
    rows_dir = []
    rows_eps = []
    rows_err = []
    for check in report.directions:
        for eps, err in sorted(check.errors.items(), reverse=True):
            rows_dir.append(check.index)
            rows_eps.append(eps)
            rows_err.append(err)
    write_series_csv({"direction": rows_dir, "eps": rows_eps,
                      "rel_err": rows_err}, out_dir / "gradcheck.csv")
    best = [c.best_rel_err for c in report.directions]
    plots.save_series_figure(
        [c.index for c in report.directions], {"best relative error": best},
        out_dir / "fig_gradcheck.png", xlabel="direction", logy=True,
    )
    for check in report.directions:
        print(f"direction {check.index}: best rel err {check.best_rel_err:.3e} "
              f"at eps {check.best_eps:g}")
    print(f"gradcheck: worst best-error {report.max_best_error:.3e}, "
          f"outputs in {out_dir}")
    return 0


def _run_verify(spec: ProblemSpec) -> int:
    results = run_verification(spec)
    failed = False
    for result in results:
        tag = "PASS" if result.passed else "FAIL"
        failed = failed or not result.passed
        print(f"{tag}: {result.name}: {result.detail}")
    return 3 if failed else 0


def cli_main(argv=None) -> int:
    """Entry point; returns the process exit code."""
    _apply_thread_cap()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    if getattr(args, "snap_every", None) is not None and args.snap_every < 1:
        print("usage error: --snap-every must be at least 1", file=sys.stderr)
        return 1

    try:
        spec = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    try:
        if args.command == "verify":
            return _run_verify(spec)
        out_dir = Path(args.out if args.out else spec.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "forward":
            return _run_forward(spec, out_dir, args.snap_every)
        if args.command == "optimize":
            return _run_optimize(spec, out_dir)
        return _run_gradcheck(spec, out_dir)
    except ConfigError as exc:
        # desired states and controls referencing files resolve lazily
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (RuntimeError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
