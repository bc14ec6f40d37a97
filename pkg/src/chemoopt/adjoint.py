"""Discrete adjoint of the splitting scheme and the reduced gradient.

Discretize-then-optimize: the backward sweep below is the exact
transpose of the linearized forward map, block by block, not an
independent discretization of the continuous multiplier system.  That
makes gradient and duality tests machine-tight; consistency with the
continuous system is a separate convergence property (checked in the
test suite).

With A_v(f) = diag(1/dt + 1 - f) - Lap_h and A_u = (1/dt)I - Lap_h (the
same SPD operators as the forward solve, reused by symmetry), the sweep
runs n = n_steps-1 .. 0 from zero terminal multipliers:

    A_u      lam_n = s_u[n] + eta_{n+1} + lam_{n+1}/dt - gradv.gradz(v[n+2], lam_{n+1])
    A_v(f_n) eta_n = s_v[n] + div_h(u[n] grad lam_n)   + eta_{n+1}/dt

where s_u[n] = alpha_u * mask_d * (u[n+1] - u_d[n]) and
      s_v[n] = alpha_v * mask_d * (v[n+1] - v_d[n]).

As dt, h -> 0 this is consistent with the backward-in-time system

    -d(lam)/dt - Lap lam + grad lam . grad v - eta = alpha_u (u - u_d) 1_{Od},
    -d(eta)/dt - Lap eta + eta - f*eta - div(u grad lam)
                                               = alpha_v (v - v_d) 1_{Od},
    lam(T) = eta(T) = 0,  zero-flux boundaries.

The reduced gradient per step and cell of the control subdomain is
g = N f^3 + v*eta with v at the implicit level of the v-solve and eta
the multiplier of that same solve; these are exactly the factors
produced by transposing the v-step's dependence on f, so the free-set
stationarity law f = (-v*eta/N)^(1/3) holds cell-wise at machine
precision at a converged point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forward import Control, Trajectory
from .functional import CostWeights, DesiredStates
from .grid import (
    Grid,
    ScalarField,
    chemotaxis_divergence_raw,
    grad_dot_grad_raw,
)
from .linsolve import DEFAULT_TOL, StencilOperator, solve_spd

__all__ = [
    "AdjointTrajectory",
    "ControlGradient",
    "TangentTrajectory",
    "adjoint_sweep",
    "solve_adjoint",
    "linearized_forward",
    "reduced_gradient",
    "initial_condition_gradients",
    "control_inner",
]


@dataclass(frozen=True, eq=False)
class AdjointTrajectory:
    """Multiplier pair (lam, eta) on the time grid, zero at the final level."""

    lam: list
    eta: list

    def __post_init__(self):
        if len(self.lam) != len(self.eta):
            raise ValueError("lam and eta must have equal length")
        last = len(self.lam) - 1
        if np.any(self.lam[last].values != 0.0) or np.any(self.eta[last].values != 0.0):
            raise ValueError("terminal multiplier slices must be zero")

    @property
    def n_steps(self) -> int:
        return len(self.lam) - 1

    def reversed_clock(self):
        """(lam, eta) indexed on the reversed clock s = T - t, so the
        terminal condition becomes an initial one."""
        return list(reversed(self.lam)), list(reversed(self.eta))


@dataclass(frozen=True, eq=False)
class ControlGradient:
    """Gradient with respect to the control array; zero outside mask_c."""

    values: np.ndarray
    grid: Grid
    n_steps: int

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.n_steps, self.grid.ncells):
            raise ValueError("gradient shape does not match control layout")
        if not np.isfinite(values).all():
            raise ValueError("gradient contains non-finite entries")
        values[:, ~self.grid.mask_c] = 0.0
        object.__setattr__(self, "values", values)


@dataclass(frozen=True, eq=False)
class TangentTrajectory:
    """Perturbation trajectory produced by the linearized forward map."""

    du: list
    dv: list


def _check_pair(traj: Trajectory, control: Control):
    grid = traj.params.grid
    if control.grid is not grid and not control.grid.matches(grid):
        raise ValueError("control and trajectory live on different grids")
    if control.n_steps != traj.n_steps:
        raise ValueError(
            f"control has {control.n_steps} steps, trajectory {traj.n_steps}"
        )


def adjoint_sweep(traj: Trajectory, control: Control,
                  source_u: list, source_v: list, *,
                  tol: float = DEFAULT_TOL) -> AdjointTrajectory:
    """Backward transpose sweep with arbitrary per-step sources.

    ``source_u[n]`` / ``source_v[n]`` take the place of the tracking
    misfits; ``solve_adjoint`` is this sweep with the misfit sources.
    Exposed separately because duality tests and the verify suite need
    to drive the transpose with arbitrary right-hand sides.
    """
    _check_pair(traj, control)
    grid = traj.params.grid
    n_steps = traj.n_steps
    if len(source_u) != n_steps or len(source_v) != n_steps:
        raise ValueError("sources must provide one field per step")
    dt = traj.params.time.dt
    u = [s.values for s in traj.u]
    v = [s.values for s in traj.v]

    zero = np.zeros(grid.ncells)
    lam = [None] * (n_steps + 1)
    eta = [None] * (n_steps + 1)
    lam[n_steps] = zero
    eta[n_steps] = zero
    op_u = StencilOperator(grid, np.full(grid.ncells, 1.0 / dt))
    for n in range(n_steps - 1, -1, -1):
        rhs_l = source_u[n].values.copy()
        if n < n_steps - 1:
            rhs_l += eta[n + 1] + lam[n + 1] / dt
            rhs_l -= grad_dot_grad_raw(v[n + 2], lam[n + 1], grid)
        lam[n] = solve_spd(op_u, rhs_l, tol=tol)

        rhs_e = source_v[n].values + chemotaxis_divergence_raw(u[n], lam[n], grid)
        if n < n_steps - 1:
            rhs_e += eta[n + 1] / dt
        sigma = 1.0 / dt + 1.0 - control.values[n]
        eta[n] = solve_spd(StencilOperator(grid, sigma), rhs_e, tol=tol)

    return AdjointTrajectory(
        lam=[ScalarField(x, grid) for x in lam],
        eta=[ScalarField(x, grid) for x in eta],
    )


def solve_adjoint(traj: Trajectory, control: Control, weights: CostWeights,
                  desired: DesiredStates, *,
                  tol: float = DEFAULT_TOL) -> AdjointTrajectory:
    """Solve the adjoint system for the tracking objective.

    The trajectory must come from ``solve_forward`` with the same
    control.  Each backward step costs one SPD solve per multiplier;
    the transposed implicit operators equal the forward ones by
    symmetry of the Laplacian and the diagonal shifts.
    """
    _check_pair(traj, control)
    grid = traj.params.grid
    n_steps = traj.n_steps
    if desired.n_steps != n_steps:
        raise ValueError(
            f"desired states have {desired.n_steps} steps, trajectory {n_steps}"
        )
    md = grid.mask_d.astype(float)
    source_u = []
    source_v = []
    for n in range(n_steps):
        su = weights.alpha_u * md * (traj.u[n + 1].values - desired.u_d[n].values)
        sv = weights.alpha_v * md * (traj.v[n + 1].values - desired.v_d[n].values)
        source_u.append(ScalarField(su, grid))
        source_v.append(ScalarField(sv, grid))
    return adjoint_sweep(traj, control, source_u, source_v, tol=tol)


def linearized_forward(traj: Trajectory, control: Control,
                       du0: ScalarField, dv0: ScalarField, df: Control, *,
                       tol: float = DEFAULT_TOL) -> TangentTrajectory:
    """Propagate perturbations through the differentiated step maps.

    The tangent recursion, linear in (du0, dv0, df):

        A_v(f_n) dv_{n+1} = dv_n/dt + du_n + v_{n+1} * df_n
        A_u      du_{n+1} = du_n/dt + div_h(du_n grad v_{n+1})
                                    + div_h(u_n grad dv_{n+1})
    """
    _check_pair(traj, control)
    _check_pair(traj, df)
    grid = traj.params.grid
    dt = traj.params.time.dt
    n_steps = traj.n_steps
    op_u = StencilOperator(grid, np.full(grid.ncells, 1.0 / dt))
    du = [du0.values]
    dv = [dv0.values]
    for n in range(n_steps):
        v_next = traj.v[n + 1].values
        sigma = 1.0 / dt + 1.0 - control.values[n]
        rhs_v = dv[n] / dt + du[n] + v_next * df.values[n]
        dvn = solve_spd(StencilOperator(grid, sigma), rhs_v, tol=tol)
        rhs_u = (du[n] / dt
                 + chemotaxis_divergence_raw(du[n], v_next, grid)
                 + chemotaxis_divergence_raw(traj.u[n].values, dvn, grid))
        dun = solve_spd(op_u, rhs_u, tol=tol)
        du.append(dun)
        dv.append(dvn)
    return TangentTrajectory(
        du=[ScalarField(x, grid) for x in du],
        dv=[ScalarField(x, grid) for x in dv],
    )


def reduced_gradient(traj: Trajectory, adj: AdjointTrajectory,
                     control: Control, weights: CostWeights) -> ControlGradient:
    """Gradient of the discrete objective with respect to the control.

    Per step n and cell of the control subdomain:
        g = N f^3 + v_{n+1} * eta_n.
    This is the Riesz representative under the space-time inner product
    sum_n dt * hx*hy * sum_cells, so <g, df> equals the directional
    derivative of the objective exactly (to solver tolerance).
    """
    _check_pair(traj, control)
    if adj.n_steps != traj.n_steps:
        raise ValueError("adjoint and trajectory step counts differ")
    grid = traj.params.grid
    g = np.empty_like(control.values)
    for n in range(traj.n_steps):
        g[n] = (weights.n_cost * control.values[n] ** 3
                + traj.v[n + 1].values * adj.eta[n].values)
    return ControlGradient(g, grid, control.n_steps)


def initial_condition_gradients(traj: Trajectory, adj: AdjointTrajectory):
    """Sensitivities of the swept functional to the initial data.

    Returns raw arrays (d/du0, d/dv0) as Riesz representatives under
    the spatial inner product hx*hy * sum_cells:

        d/du0 = lam_0 + dt * eta_0 - dt * gradv.gradz(v[1], lam_0)
        d/dv0 = eta_0
    """
    grid = traj.params.grid
    dt = traj.params.time.dt
    lam0 = adj.lam[0].values
    eta0 = adj.eta[0].values
    gu = lam0 + dt * eta0 - dt * grad_dot_grad_raw(traj.v[1].values, lam0, grid)
    return gu, eta0.copy()


def control_inner(a: np.ndarray, b: np.ndarray, grid: Grid, dt: float) -> float:
    """Space-time inner product over Q_c: sum_n dt * hx*hy * sum_c a*b."""
    return dt * grid.cell_area * float((a * b).sum())
