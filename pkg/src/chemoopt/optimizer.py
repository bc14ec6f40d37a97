"""Projected gradient descent over the admissible control set.

The admissible set is convex (free, or a per-cell box), so first-order
stationarity is the variational inequality: the reduced gradient pairs
nonnegatively with every feasible direction.  The computable certificate
used here is the projected-gradient residual

    ||f - Proj(f - s*g)||_2 / s,

which vanishes exactly at points satisfying the inequality: cells where
the projection absorbs the step contribute nothing, and on a free set
the residual reduces to ||g||_2.  Iterations are f <- Proj(f - s*g) with
Armijo backtracking, optionally warm-started with a Barzilai-Borwein
step; accepted iterations never increase the objective.

Existence of minimizers requires N > 0 or a bounded admissible set;
a free set with zero control cost is rejected at configuration time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adjoint import control_inner, reduced_gradient, solve_adjoint
from .forward import Control, ModelParams, solve_forward
from .functional import CostWeights, DesiredStates, evaluate_j
from .linsolve import DEFAULT_TOL

__all__ = [
    "FreeSet",
    "BoxSet",
    "OptimizeOptions",
    "OptimizeReport",
    "GradientCheckReport",
    "DirectionCheck",
    "project",
    "stationarity_residual",
    "optimize",
    "gradient_check",
]


@dataclass(frozen=True)
class FreeSet:
    """Unconstrained admissible set (all of the control space)."""


@dataclass(frozen=True)
class BoxSet:
    """Cell-wise bounds f_min <= f <= f_max on the control subdomain."""

    f_min: float
    f_max: float

    def __post_init__(self):
        if self.f_min > self.f_max:
            raise ValueError(
                f"box bounds out of order: f_min={self.f_min} > f_max={self.f_max}"
            )


AdmissibleSet = FreeSet | BoxSet


def _project_values(values: np.ndarray, admissible: AdmissibleSet) -> np.ndarray:
    if isinstance(admissible, BoxSet):
        return np.clip(values, admissible.f_min, admissible.f_max)
    return values


def project(control: Control, admissible: AdmissibleSet) -> Control:
    """Closest admissible control in the discrete L2 sense.

    Cell-wise clamping for a box, identity for a free set; the support
    stays inside the control mask (enforced by the Control constructor).
    """
    if isinstance(admissible, FreeSet):
        return control
    return control.replace_values(_project_values(control.values, admissible))


def stationarity_residual(control: Control, grad, admissible: AdmissibleSet,
                          probe_step: float = 1.0) -> float:
    """Projected-gradient residual ||f - Proj(f - s*g)||_2 / s."""
    if probe_step <= 0:
        raise ValueError("probe_step must be positive")
    trial = _project_values(control.values - probe_step * grad.values, admissible)
    trial[:, ~control.grid.mask_c] = 0.0
    return float(np.linalg.norm(control.values - trial)) / probe_step


@dataclass(frozen=True)
class OptimizeOptions:
    max_iters: int = 200
    tol: float = 1e-8
    armijo_c: float = 1e-4
    backtrack_ratio: float = 0.5
    step_init: float = 1.0
    bb_warm_start: bool = True
    probe_step: float = 1.0
    solver_tol: float = DEFAULT_TOL
    min_step: float = 1e-14

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.tol <= 0 or self.armijo_c <= 0 or self.step_init <= 0:
            raise ValueError("tol, armijo_c and step_init must be positive")
        if not 0 < self.backtrack_ratio < 1:
            raise ValueError("backtrack_ratio must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class OptimizeReport:
    """Iteration history of a projected-gradient run.

    All histories carry one entry per iterate, the initial point
    included (its step size is recorded as 0).
    """

    control: Control
    iterations: int
    breakdown_history: list
    residual_history: list
    step_history: list
    infeasibility_history: list
    termination: str
    options: OptimizeOptions

    @property
    def j_history(self) -> np.ndarray:
        return np.array([b.total for b in self.breakdown_history])


def _infeasibility(control: Control, admissible: AdmissibleSet) -> float:
    proj = _project_values(control.values, admissible)
    return float(np.abs(control.values - proj).max(initial=0.0))


def optimize(params: ModelParams, weights: CostWeights, desired: DesiredStates,
             admissible: AdmissibleSet, f_init: Control,
             opts: OptimizeOptions = OptimizeOptions()) -> OptimizeReport:
    """Minimize the tracking-plus-cost objective over the admissible set.

    Each iteration runs one forward and one adjoint solve plus at least
    one trial forward solve for the Armijo test
        J(f_new) <= J(f) - armijo_c * ||f - f_new||^2 / s
    with the move measured in the discrete L2(Q_c) norm.
    Stops when the stationarity residual drops below opts.tol, when
    max_iters is reached, or when backtracking underflows opts.min_step
    (termination "line_search_failed", last iterate returned).
    """
    if isinstance(admissible, FreeSet) and weights.n_cost == 0:
        raise ValueError(
            "free admissible set requires a positive control cost "
            "(N > 0 or a bounded set)"
        )

    def evaluate(ctrl: Control):
        traj = solve_forward(params, ctrl, tol=opts.solver_tol)
        return traj, evaluate_j(traj, ctrl, weights, desired)

    # Armijo must measure the move in the same discrete L2(Q_c) inner
    # product that pairs the reduced gradient with control increments;
    # with a plain array norm the required decrease would be off by the
    # quadrature weight dt*hx*hy and acceptance would depend on grid
    # resolution.
    move_weight = params.time.dt * params.grid.cell_area

    f = project(f_init, admissible)
    traj, cost = evaluate(f)
    adj = solve_adjoint(traj, f, weights, desired, tol=opts.solver_tol)
    grad = reduced_gradient(traj, adj, f, weights)
    res = stationarity_residual(f, grad, admissible, opts.probe_step)

    breakdowns = [cost]
    residuals = [res]
    steps = [0.0]
    infeas = [_infeasibility(f, admissible)]
    termination = "max_iters"
    prev_f = None
    prev_g = None
    last_step = opts.step_init

    for _ in range(opts.max_iters):
        if res <= opts.tol:
            termination = "converged"
            break

        step = opts.step_init
        if opts.bb_warm_start and prev_f is not None:
            df = f.values - prev_f
            dg = grad.values - prev_g
            den = float((df * dg).sum())
            if den > 0.0:
                step = float((df * df).sum()) / den
            else:
                step = 2.0 * last_step
            step = float(np.clip(step, 1e-12, 1e8))

        accepted = False
        s = step
        while s >= opts.min_step:
            trial_values = _project_values(f.values - s * grad.values, admissible)
            f_trial = f.replace_values(trial_values)
            move2 = move_weight * float(((f.values - f_trial.values) ** 2).sum())
            traj_trial, cost_trial = evaluate(f_trial)
            if cost_trial.total <= cost.total - opts.armijo_c * move2 / s:
                accepted = True
                break
            s *= opts.backtrack_ratio
        if not accepted:
            termination = "line_search_failed"
            break

        prev_f, prev_g = f.values, grad.values
        f, traj, cost = f_trial, traj_trial, cost_trial
        last_step = s
        adj = solve_adjoint(traj, f, weights, desired, tol=opts.solver_tol)
        grad = reduced_gradient(traj, adj, f, weights)
        res = stationarity_residual(f, grad, admissible, opts.probe_step)

        breakdowns.append(cost)
        residuals.append(res)
        steps.append(s)
        infeas.append(_infeasibility(f, admissible))
    else:
        if res <= opts.tol:
            termination = "converged"

    return OptimizeReport(
        control=f,
        iterations=len(breakdowns) - 1,
        breakdown_history=breakdowns,
        residual_history=residuals,
        step_history=steps,
        infeasibility_history=infeas,
        termination=termination,
        options=opts,
    )


@dataclass(frozen=True)
class DirectionCheck:
    index: int
    adjoint_value: float
    best_eps: float
    best_rel_err: float
    errors: dict


@dataclass(frozen=True)
class GradientCheckReport:
    directions: list

    @property
    def max_best_error(self) -> float:
        return max((d.best_rel_err for d in self.directions), default=0.0)


def gradient_check(params: ModelParams, control: Control, weights: CostWeights,
                   desired: DesiredStates, n_directions: int, eps_list,
                   seed: int = 0, *,
                   solver_tol: float = DEFAULT_TOL) -> GradientCheckReport:
    """Compare the adjoint directional derivative with central differences.

    For each random unit direction supported in the control mask, the
    pairing <g, df> is compared against (J(f+eps*df) - J(f-eps*df))/(2*eps)
    across eps_list; the report carries the smallest relative error per
    direction.  Deterministic for a fixed seed.
    """
    if n_directions < 1:
        raise ValueError("n_directions must be at least 1")
    eps_list = list(eps_list)
    if not eps_list:
        raise ValueError("eps_list must be nonempty")

    grid = params.grid
    dt = params.time.dt
    traj = solve_forward(params, control, tol=solver_tol)
    adj = solve_adjoint(traj, control, weights, desired, tol=solver_tol)
    grad = reduced_gradient(traj, adj, control, weights)

    rng = np.random.default_rng(seed)
    checks = []
    for k in range(n_directions):
        d = rng.standard_normal(control.values.shape)
        d[:, ~grid.mask_c] = 0.0
        d /= np.linalg.norm(d)
        dd_adj = control_inner(grad.values, d, grid, dt)
        errors = {}
        for eps in eps_list:
            jp = evaluate_j(
                solve_forward(params, control.replace_values(control.values + eps * d),
                              tol=solver_tol),
                control.replace_values(control.values + eps * d), weights, desired,
            ).total
            jm = evaluate_j(
                solve_forward(params, control.replace_values(control.values - eps * d),
                              tol=solver_tol),
                control.replace_values(control.values - eps * d), weights, desired,
            ).total
            dd_fd = (jp - jm) / (2.0 * eps)
            denom = max(abs(dd_adj), abs(dd_fd))
            errors[eps] = abs(dd_adj - dd_fd) / denom if denom > 0 else 0.0
        best_eps = min(errors, key=errors.get)
        checks.append(DirectionCheck(
            index=k, adjoint_value=dd_adj,
            best_eps=best_eps, best_rel_err=errors[best_eps], errors=errors,
        ))
    return GradientCheckReport(directions=checks)
