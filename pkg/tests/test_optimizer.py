import numpy as np
import pytest

from chemoopt.adjoint import control_inner, reduced_gradient, solve_adjoint
from chemoopt.forward import Control, ModelParams, TimeGrid, solve_forward
from chemoopt.functional import CostWeights, DesiredStates
from chemoopt.grid import ScalarField, build_grid
from chemoopt.optimizer import (
    BoxSet,
    FreeSet,
    OptimizeOptions,
    gradient_check,
    optimize,
    project,
    stationarity_residual,
)
from helpers import smooth_bumps


def _tracking_problem(seed=5, nx=6, n_steps=6, t_final=0.3,
                      alpha=1e-3, n_cost=1.0):
    rng = np.random.default_rng(seed)
    grid = build_grid(nx, nx, 1.0, 1.0)
    time = TimeGrid(t_final, n_steps)
    u0 = smooth_bumps(grid, rng, base=0.5)
    v0 = smooth_bumps(grid, rng, base=0.5)
    params = ModelParams(grid, time, u0, v0)
    weights = CostWeights(alpha, alpha, n_cost)
    u_d = ScalarField(np.full(grid.ncells, 0.2), grid)
    v_d = ScalarField(np.full(grid.ncells, 0.1), grid)
    desired = DesiredStates.constant_in_time(u_d, v_d, n_steps)
    return params, weights, desired


def test_project_free_is_identity():
    grid = build_grid(3, 3, 1.0, 1.0)
    control = Control(np.linspace(-2, 2, 27).reshape(3, 9), grid, 3)
    assert project(control, FreeSet()) is control


def test_project_box_clamps():
    grid = build_grid(2, 2, 1.0, 1.0)
    control = Control(np.array([[3.0, -2.0, 0.5, 1.0]]), grid, 1)
    box = BoxSet(-1.0, 1.0)
    out = project(control, box)
    assert out.values.tolist() == [[1.0, -1.0, 0.5, 1.0]]
    again = project(out, box)
    assert np.array_equal(again.values, out.values)


def test_project_preserves_mask_support():
    grid = build_grid(2, 2, 1.0, 1.0, mask_c_spec=(0.0, 0.0, 0.5, 1.0))
    control = Control(np.full((2, 4), 0.2), grid, 2)
    out = project(control, BoxSet(0.5, 1.0))
    assert np.all(out.values[:, ~grid.mask_c] == 0.0)
    assert np.all(out.values[:, grid.mask_c] == 0.5)


def test_box_bounds_validated():
    with pytest.raises(ValueError, match="f_min"):
        BoxSet(1.0, -1.0)


def test_stationarity_residual_cases():
    grid = build_grid(3, 3, 1.0, 1.0)
    control = Control.zeros(grid, 2)
    zero_grad = Control.zeros(grid, 2)
    assert stationarity_residual(control, zero_grad, FreeSet()) == 0.0

    g = Control(np.arange(18, dtype=float).reshape(2, 9), grid, 2)
    res = stationarity_residual(control, g, FreeSet())
    assert res == float(np.linalg.norm(g.values))

    # outward gradient at the active bound is absorbed by the projection
    outward = Control(np.full((2, 9), 5.0), grid, 2)
    assert stationarity_residual(control, outward, BoxSet(0.0, 1.0)) == 0.0
    with pytest.raises(ValueError, match="probe_step"):
        stationarity_residual(control, g, FreeSet(), probe_step=0.0)


def test_optimize_pure_cost_drives_control_to_zero():
    params, _, desired = _tracking_problem()
    weights = CostWeights(0.0, 0.0, 2.0)
    grid = params.grid
    n_steps = params.time.n_steps
    rng = np.random.default_rng(0)
    f_init = Control(rng.uniform(-1, 1, (n_steps, grid.ncells)), grid, n_steps)
    opts = OptimizeOptions(max_iters=100, tol=1e-8)
    report = optimize(params, weights, desired, FreeSet(), f_init, opts)
    assert report.termination == "converged"
    assert report.residual_history[-1] <= opts.tol
    # unique minimizer of (N/4)||f||^4 is f = 0
    assert np.abs(report.control.values).max() <= 1e-2
    assert report.j_history[-1] <= 1e-9


def test_optimize_self_target_recovery():
    params, _, _ = _tracking_problem()
    grid = params.grid
    n_steps = params.time.n_steps
    f_star = Control(np.full((n_steps, grid.ncells), 0.4), grid, n_steps)
    traj_star = solve_forward(params, f_star)
    desired = DesiredStates(list(traj_star.u[1:]), list(traj_star.v[1:]))
    weights = CostWeights(1.0, 1.0, 0.0)
    opts = OptimizeOptions(max_iters=300, tol=1e-12)
    report = optimize(params, weights, desired, BoxSet(-1.0, 1.0),
                      Control.zeros(grid, n_steps), opts)
    assert report.j_history[-1] <= 1e-4 * report.j_history[0]


def test_optimize_constructed_stationary_point():
    # one fixed-point pass of the control law lands near stationarity
    params, weights, desired = _tracking_problem()
    grid = params.grid
    n_steps = params.time.n_steps
    f0 = Control.zeros(grid, n_steps)
    traj = solve_forward(params, f0)
    adj = solve_adjoint(traj, f0, weights, desired)
    f1 = Control(
        np.array([np.cbrt(-traj.v[n + 1].values * adj.eta[n].values
                          / weights.n_cost) for n in range(n_steps)]),
        grid, n_steps,
    )
    opts = OptimizeOptions(max_iters=10, tol=1e-4)
    report = optimize(params, weights, desired, FreeSet(), f1, opts)
    assert report.termination == "converged"
    assert report.iterations <= 2
    assert report.residual_history[-1] <= opts.tol


def test_optimize_monotone_feasible_histories():
    params, weights, desired = _tracking_problem(alpha=0.5)
    grid = params.grid
    n_steps = params.time.n_steps
    box = BoxSet(-0.05, 0.05)
    opts = OptimizeOptions(max_iters=30, tol=1e-10)
    report = optimize(params, weights, desired, box,
                      Control.zeros(grid, n_steps), opts)
    j = report.j_history
    assert np.all(np.diff(j) <= 0.0)
    assert all(v == 0.0 for v in report.infeasibility_history)
    lengths = {len(report.breakdown_history), len(report.residual_history),
               len(report.step_history), len(report.infeasibility_history)}
    assert lengths == {report.iterations + 1}
    assert report.control.values.max() <= 0.05
    assert report.control.values.min() >= -0.05


def test_optimize_is_deterministic():
    params, weights, desired = _tracking_problem()
    f_init = Control.zeros(params.grid, params.time.n_steps)
    opts = OptimizeOptions(max_iters=20, tol=1e-9)
    r1 = optimize(params, weights, desired, FreeSet(), f_init, opts)
    r2 = optimize(params, weights, desired, FreeSet(), f_init, opts)
    assert np.array_equal(r1.control.values, r2.control.values)
    assert r1.j_history.tolist() == r2.j_history.tolist()
    assert r1.residual_history == r2.residual_history
    assert r1.step_history == r2.step_history
    assert r1.termination == r2.termination


def test_optimize_rejects_free_set_without_cost():
    params, _, desired = _tracking_problem()
    weights = CostWeights(1.0, 1.0, 0.0)
    with pytest.raises(ValueError, match="N > 0 or a bounded set"):
        optimize(params, weights, desired, FreeSet(),
                 Control.zeros(params.grid, params.time.n_steps))


def test_optimize_line_search_failure_reported():
    # an overdemanding Armijo constant rejects every step down to the
    # underflow threshold; the last iterate is still returned
    params, weights, desired = _tracking_problem()
    opts = OptimizeOptions(max_iters=5, tol=1e-16, armijo_c=1e8,
                           bb_warm_start=False)
    report = optimize(params, weights, desired, FreeSet(),
                      Control.zeros(params.grid, params.time.n_steps), opts)
    assert report.termination == "line_search_failed"
    assert report.control is not None
    assert np.all(np.diff(report.j_history) <= 0.0)


def test_optimize_options_validation():
    with pytest.raises(ValueError):
        OptimizeOptions(max_iters=0)
    with pytest.raises(ValueError):
        OptimizeOptions(tol=-1.0)
    with pytest.raises(ValueError):
        OptimizeOptions(backtrack_ratio=1.0)


def test_gradient_check_trivial_configuration_is_zero():
    params, _, desired = _tracking_problem()
    weights = CostWeights(0.0, 0.0, 1.0)
    control = Control.zeros(params.grid, params.time.n_steps)
    report = gradient_check(params, control, weights, desired,
                            n_directions=3, eps_list=[1e-4, 1e-5], seed=1)
    assert all(d.best_rel_err == 0.0 for d in report.directions)
    assert report.max_best_error == 0.0


def test_gradient_check_random_problem():
    params, weights, desired = _tracking_problem(alpha=1.0)
    rng = np.random.default_rng(2)
    control = Control(
        0.3 * rng.standard_normal((params.time.n_steps, params.grid.ncells)),
        params.grid, params.time.n_steps)
    report = gradient_check(params, control, weights, desired,
                            n_directions=4,
                            eps_list=[1e-3, 1e-4, 1e-5, 1e-6], seed=3)
    assert report.max_best_error <= 1e-5
    assert len(report.directions) == 4


def test_gradient_check_is_deterministic():
    params, weights, desired = _tracking_problem()
    control = Control.zeros(params.grid, params.time.n_steps)
    r1 = gradient_check(params, control, weights, desired,
                        n_directions=2, eps_list=[1e-4], seed=7)
    r2 = gradient_check(params, control, weights, desired,
                        n_directions=2, eps_list=[1e-4], seed=7)
    assert [d.best_rel_err for d in r1.directions] == \
        [d.best_rel_err for d in r2.directions]
    assert [d.adjoint_value for d in r1.directions] == \
        [d.adjoint_value for d in r2.directions]


def test_directional_pairing_scales_exactly():
    params, weights, desired = _tracking_problem()
    grid, time = params.grid, params.time
    rng = np.random.default_rng(4)
    control = Control(0.2 * rng.standard_normal((time.n_steps, grid.ncells)),
                      grid, time.n_steps)
    traj = solve_forward(params, control)
    adj = solve_adjoint(traj, control, weights, desired)
    grad = reduced_gradient(traj, adj, control, weights)
    d = rng.standard_normal(control.values.shape)
    one = control_inner(grad.values, d, grid, time.dt)
    two = control_inner(grad.values, 2.0 * d, grid, time.dt)
    assert two == 2.0 * one


def test_gradient_check_argument_validation():
    params, weights, desired = _tracking_problem()
    control = Control.zeros(params.grid, params.time.n_steps)
    with pytest.raises(ValueError, match="n_directions"):
        gradient_check(params, control, weights, desired, 0, [1e-4])
    with pytest.raises(ValueError, match="eps_list"):
        gradient_check(params, control, weights, desired, 1, [])
