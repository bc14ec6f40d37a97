"""Runtime invariant suite behind the ``verify`` CLI subcommand.

Four checks, each reporting PASS/FAIL with a measured number:

* mass conservation of u along a forward solve with random data,
* nonnegativity under the documented time-step bound,
* adjoint transpose identity (duality of the linearized forward map and
  the backward sweep, matrix-free),
* the free-set stationarity law f = (-v*eta/N)^(1/3) at a converged
  optimizer iterate.

The first two run on the configured grid and horizon; the transpose and
stationarity checks run on small fixed problems so the suite stays at
desk scale regardless of the configured resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .adjoint import (
    adjoint_sweep,
    control_inner,
    initial_condition_gradients,
    linearized_forward,
    solve_adjoint,
)
from .config import ProblemSpec
from .forward import (
    Control,
    ModelParams,
    TimeGrid,
    dt_positivity_bound,
    solve_forward,
)
from .functional import CostWeights, DesiredStates
from .grid import Grid, ScalarField, build_grid, face_gradient_max
from .optimizer import FreeSet, OptimizeOptions, optimize

__all__ = ["CheckResult", "run_verification", "smooth_bump_field"]

MASS_TOL = 1e-11
POSITIVITY_TOL = 1e-12
TRANSPOSE_TOL = 1e-11
LAW_TOL = 1e-6


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def smooth_bump_field(grid: Grid, rng: np.random.Generator, *,
                      base: float = 0.05, n_bumps: int = 3,
                      amplitude: float = 1.0) -> ScalarField:
    """Nonnegative mixture of Gaussian bumps, smooth at the grid scale."""
    x, y = grid.cell_centers()
    values = np.full(grid.ncells, float(base))
    for _ in range(n_bumps):
        cx = rng.uniform(0.15, 0.85) * grid.lx
        cy = rng.uniform(0.15, 0.85) * grid.ly
        width = rng.uniform(0.12, 0.3) * min(grid.lx, grid.ly)
        amp = rng.uniform(0.3, 1.0) * amplitude
        values += amp * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * width**2))
    return ScalarField(values, grid)


def _check_mass(spec: ProblemSpec) -> CheckResult:
    rng = np.random.default_rng(spec.seed)
    grid, time = spec.grid, spec.time
    u0 = ScalarField(rng.random(grid.ncells), grid)
    v0 = ScalarField(rng.random(grid.ncells), grid)
    params = ModelParams(grid, time, u0, v0)
    control = Control(rng.uniform(-1.0, 1.0, (time.n_steps, grid.ncells)),
                      grid, time.n_steps)
    traj = solve_forward(params, control)
    scale = abs(traj.mass[0]) + 1e-2
    drift = float(np.abs(traj.mass - traj.mass[0]).max()) / scale
    return CheckResult(
        "mass-conservation", drift <= MASS_TOL,
        f"max relative drift {drift:.3e} (tol {MASS_TOL:.0e})",
    )


def _check_positivity(spec: ProblemSpec) -> CheckResult:
    rng = np.random.default_rng(spec.seed + 1)
    grid = spec.grid
    t_final = min(spec.time.t_final, 1.0)
    u0 = smooth_bump_field(grid, rng)
    v0 = smooth_bump_field(grid, rng)
    f_field = smooth_bump_field(grid, rng, base=-0.25, amplitude=0.5)

    n_steps = spec.time.n_steps
    for _ in range(3):
        time = TimeGrid(t_final, n_steps)
        params = ModelParams(grid, time, u0, v0)
        fvals = np.tile(f_field.values, (n_steps, 1))
        traj = solve_forward(params, Control(fvals, grid, n_steps))
        grad_v = max(face_gradient_max(v.values, grid) for v in traj.v)
        bound = dt_positivity_bound(grid, grad_v, float(np.abs(fvals).max()))
        if time.dt <= bound:
            worst = min(float(traj.min_u.min()), float(traj.min_v.min()))
            return CheckResult(
                "positivity", worst >= -POSITIVITY_TOL,
                f"min value {worst:.3e} with dt {time.dt:.3e} "
                f"under bound {bound:.3e} (tol -{POSITIVITY_TOL:.0e})",
            )
        n_steps = max(n_steps + 1, math.ceil(t_final / bound))
        if n_steps > 100000:
            break
    return CheckResult(
        "positivity", False,
        f"could not reach the time-step bound (needed {n_steps} steps)",
    )


def _check_transpose(spec: ProblemSpec) -> CheckResult:
    rng = np.random.default_rng(spec.seed + 2)
    grid = build_grid(3, 3, 1.0, 1.0)
    n_steps = 2
    time = TimeGrid(0.4, n_steps)
    u0 = ScalarField(0.5 + rng.random(grid.ncells), grid)
    v0 = ScalarField(0.3 + rng.random(grid.ncells), grid)
    params = ModelParams(grid, time, u0, v0)
    control = Control(0.7 * rng.standard_normal((n_steps, grid.ncells)),
                      grid, n_steps)
    traj = solve_forward(params, control, tol=1e-14)

    worst = 0.0
    for _ in range(5):
        du0 = ScalarField(rng.standard_normal(grid.ncells), grid)
        dv0 = ScalarField(rng.standard_normal(grid.ncells), grid)
        df = Control(rng.standard_normal((n_steps, grid.ncells)), grid, n_steps)
        su = [ScalarField(rng.standard_normal(grid.ncells), grid)
              for _ in range(n_steps)]
        sv = [ScalarField(rng.standard_normal(grid.ncells), grid)
              for _ in range(n_steps)]

        tan = linearized_forward(traj, control, du0, dv0, df, tol=1e-14)
        adj = adjoint_sweep(traj, control, su, sv, tol=1e-14)

        area, dt = grid.cell_area, time.dt
        lhs = sum(
            dt * area * float(su[n].values @ tan.du[n + 1].values
                              + sv[n].values @ tan.dv[n + 1].values)
            for n in range(n_steps)
        )
        gu0, gv0 = initial_condition_gradients(traj, adj)
        fgrad = np.array([traj.v[n + 1].values * adj.eta[n].values
                          for n in range(n_steps)])
        fgrad[:, ~grid.mask_c] = 0.0
        rhs = (area * float(gu0 @ du0.values + gv0 @ dv0.values)
               + control_inner(fgrad, df.values, grid, dt))
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))
    return CheckResult(
        "adjoint-transpose", worst <= TRANSPOSE_TOL,
        f"max duality mismatch {worst:.3e} (tol {TRANSPOSE_TOL:.0e})",
    )


def _check_stationarity_law(spec: ProblemSpec) -> CheckResult:
    # fixed reference problem: the residual floor of the Armijo search
    # (a step of size s only decreases J by about s*||g||^2, which must
    # stay measurable against eps*J) depends on the data, so the check
    # is pinned to data known to converge below tol; the chemical
    # target keeps v*eta bounded away from zero, where the cube-root
    # law inversion is well conditioned.
    rng = np.random.default_rng(2024)
    grid = build_grid(6, 6, 1.0, 1.0)
    n_steps = 8
    time = TimeGrid(0.4, n_steps)
    u0 = smooth_bump_field(grid, rng, base=0.8, amplitude=0.5)
    v0 = ScalarField(np.full(grid.ncells, 0.75), grid)
    params = ModelParams(grid, time, u0, v0)
    weights = CostWeights(0.5, 1.0, 1.0)
    u_d = ScalarField(np.full(grid.ncells, 1.0), grid)
    v_d = ScalarField(np.full(grid.ncells, -0.25), grid)
    desired = DesiredStates.constant_in_time(u_d, v_d, n_steps)

    opts = OptimizeOptions(max_iters=400, tol=1e-8)
    report = optimize(params, weights, desired, FreeSet(),
                      Control.zeros(grid, n_steps), opts)
    if report.termination != "converged":
        return CheckResult(
            "stationarity-law", False,
            f"optimizer terminated with '{report.termination}' "
            f"(residual {report.residual_history[-1]:.3e})",
        )
    f = report.control
    traj = solve_forward(params, f)
    adj = solve_adjoint(traj, f, weights, desired)
    law = np.array([
        np.cbrt(-traj.v[n + 1].values * adj.eta[n].values / weights.n_cost)
        for n in range(n_steps)
    ])
    law[:, ~grid.mask_c] = 0.0
    err = float(np.abs(f.values - law).max())
    tol = LAW_TOL * (1.0 + float(np.abs(f.values).max()))
    return CheckResult(
        "stationarity-law", err <= tol,
        f"max law deviation {err:.3e} (tol {tol:.3e})",
    )


def run_verification(spec: ProblemSpec) -> list:
    """Run the invariant suite, returning one CheckResult per check."""
    return [
        _check_mass(spec),
        _check_positivity(spec),
        _check_transpose(spec),
        _check_stationarity_law(spec),
    ]
