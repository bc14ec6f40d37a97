"""Semi-implicit time stepping for the chemo-repulsion state system.

The state system on Q = (0, T) x Omega, with zero-flux boundaries and
nonnegative initial data, is

    du/dt - Lap u = div(u grad v),
    dv/dt - Lap v + v = u + f*v,

where f is the bilinear control acting on the chemical concentration,
supported on the control subdomain.  Each step is split: first solve
for v, then for u,

    (1/dt + 1 - f_n) v_{n+1} - Lap_h v_{n+1} = v_n/dt + u_n,
    (1/dt)           u_{n+1} - Lap_h u_{n+1} = u_n/dt + div_h(u_n grad v_{n+1}),

so the bilinear term is implicit (a diagonal shift, checked for SPD),
diffusion is implicit, and the conservative chemotaxis flux is explicit.
Both solves are single SPD systems.  Because the flux divergence and the
Laplacian have exactly zero cell sum, the discrete mass hx*hy*sum(u_n)
is constant up to linear-solver tolerance at every step.

Positivity is conditional, not enforced: the arithmetic-mean flux keeps
the scheme differentiable (required by the discrete adjoint) at the cost
of an unconditional sign guarantee.  Under the time-step bound
``dt_positivity_bound`` nonnegative data stay nonnegative in practice
for smooth fields; undershoot beyond -1e-12 raises a warning, never an
error, since clipping would silently break both mass conservation and
adjoint consistency.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .grid import (
    Grid,
    ScalarField,
    chemotaxis_divergence_raw,
    integrate,
)
from .linsolve import DEFAULT_TOL, StencilOperator, solve_spd

__all__ = [
    "TimeGrid",
    "ModelParams",
    "Control",
    "Trajectory",
    "StepSources",
    "step_v",
    "step_u",
    "solve_forward",
    "coupled_step_refine",
    "mass_series",
    "dt_positivity_bound",
    "TimeStepTooLargeError",
    "ForwardSolveError",
    "PicardStagnationWarning",
]

UNDERSHOOT_TOL = 1e-12


class TimeStepTooLargeError(RuntimeError):
    """The bilinear term destabilized the implicit v-operator."""


class ForwardSolveError(RuntimeError):
    """A step solve failed; carries the step index."""

    def __init__(self, step: int, message: str):
        super().__init__(f"forward solve failed at step {step}: {message}")
        self.step = step


class PicardStagnationWarning(UserWarning):
    """The inner Picard loop ran out of sweeps before reaching tol."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of (0, T] into n_steps intervals."""

    t_final: float
    n_steps: int

    def __post_init__(self):
        if self.t_final <= 0:
            raise ValueError("t_final must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be at least 1")

    @property
    def dt(self) -> float:
        return self.t_final / self.n_steps

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_final, self.n_steps + 1)


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Grid, time grid and nonnegative initial data."""

    grid: Grid
    time: TimeGrid
    u0: ScalarField
    v0: ScalarField

    def __post_init__(self):
        if not (self.u0.grid.matches(self.grid) and self.v0.grid.matches(self.grid)):
            raise ValueError("initial data live on a different grid")
        if self.u0.values.min() < 0 or self.v0.values.min() < 0:
            raise ValueError("initial data must be nonnegative")


@dataclass(frozen=True, eq=False)
class Control:
    """Piecewise-constant-in-time control on the control subdomain.

    ``values`` has shape (n_steps, ncells); row n applies on the
    interval (t_n, t_{n+1}].  Entries outside mask_c are forced to zero
    by the constructor, so the support invariant holds by construction.
    """

    values: np.ndarray
    grid: Grid
    n_steps: int

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.n_steps, self.grid.ncells):
            raise ValueError(
                f"control shape {values.shape} does not match "
                f"({self.n_steps}, {self.grid.ncells})"
            )
        if not np.isfinite(values).all():
            raise ValueError("control contains non-finite entries")
        values[:, ~self.grid.mask_c] = 0.0
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: Grid, n_steps: int) -> "Control":
        return cls(np.zeros((n_steps, grid.ncells)), grid, n_steps)

    def replace_values(self, values: np.ndarray) -> "Control":
        return Control(values, self.grid, self.n_steps)


@dataclass(frozen=True, eq=False)
class StepSources:
    """Additive step sources g_u, g_v, a test-only extension point.

    ``g_u[n]`` / ``g_v[n]`` are added to the right-hand sides of the
    u / v solves of step n (the state advancing to t_{n+1}).  Production
    runs keep them zero (sources=None).
    """

    g_u: list
    g_v: list


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Full state history with mass and min-value diagnostics."""

    u: list
    v: list
    params: ModelParams
    mass: np.ndarray = field(default=None)
    min_u: np.ndarray = field(default=None)
    min_v: np.ndarray = field(default=None)

    @property
    def n_steps(self) -> int:
        return self.params.time.n_steps


def dt_positivity_bound(grid: Grid, grad_v_max: float, f_max: float) -> float:
    """Time-step bound under which nonnegativity is maintained.

    Two mechanisms are combined:

    * M-matrix condition for the v-solve: the implicit operator
      diag(1/dt + 1 - f) - Lap_h is an M-matrix (hence inverse-positive)
      iff 1/dt + 1 - f > 0 cell-wise, giving dt < 1/(f_max - 1) when
      f_max > 1 and no restriction otherwise.
    * Advective CFL for the explicit chemotaxis flux: the flux acts like
      transport with velocity grad v; keeping the per-cell Courant
      number dt*|grad v|/h at or below 1/4 keeps the explicit part of
      the u-update diagonally dominated, dt <= h_min/(4*grad_v_max).

    The central (arithmetic-mean) flux is not unconditionally sign
    preserving for arbitrary data, so this is a practical bound: smooth
    nonnegative fields stay nonnegative under it, and any undershoot
    beyond -1e-12 is surfaced by a warning from ``solve_forward``.
    """
    bound = np.inf
    if f_max > 1.0:
        bound = 1.0 / (f_max - 1.0)
    if grad_v_max > 0.0:
        bound = min(bound, min(grid.hx, grid.hy) / (4.0 * grad_v_max))
    return bound


def _as_values(f_n) -> np.ndarray:
    return f_n.values if isinstance(f_n, ScalarField) else np.asarray(f_n, float).ravel()


def step_v(u_n: ScalarField, v_n: ScalarField, f_n, dt: float, *,
           source: ScalarField | None = None,
           tol: float = DEFAULT_TOL, max_iter: int | None = None) -> ScalarField:
    """Advance the chemical concentration one implicit step.

    Solves (1/dt + 1 - f_n) v_{n+1} - Lap_h v_{n+1} = v_n/dt + u_n, the
    bilinear term taken implicitly as a diagonal shift and u explicitly
    from the previous level.  Raises TimeStepTooLargeError when the
    shift loses positivity, min(1/dt + 1 - f_n) <= 0; the caller must
    shrink dt.
    """
    grid = u_n.grid
    fv = _as_values(f_n)
    sigma = 1.0 / dt + 1.0 - fv
    if sigma.min() <= 0.0:
        raise TimeStepTooLargeError(
            "dt too large for control magnitude: "
            f"min(1/dt + 1 - f) = {sigma.min():.3e} <= 0"
        )
    rhs = v_n.values / dt + u_n.values
    if source is not None:
        rhs = rhs + source.values
    op = StencilOperator(grid, sigma)
    return ScalarField(solve_spd(op, rhs, tol=tol, max_iter=max_iter), grid)


def step_u(u_n: ScalarField, v_next: ScalarField, dt: float, *,
           source: ScalarField | None = None,
           tol: float = DEFAULT_TOL, max_iter: int | None = None) -> ScalarField:
    """Advance the cell density one step, conserving discrete mass.

    Solves (1/dt) u_{n+1} - Lap_h u_{n+1} = u_n/dt + div_h(u_n grad v_{n+1}):
    implicit diffusion, explicit conservative chemotaxis flux.  Both the
    Laplacian and the flux divergence have zero cell sum, so
    integrate(u_{n+1}) = integrate(u_n) up to solver tolerance.
    """
    grid = u_n.grid
    rhs = u_n.values / dt + chemotaxis_divergence_raw(
        u_n.values, v_next.values, grid)
    if source is not None:
        rhs = rhs + source.values
    op = StencilOperator(grid, np.full(grid.ncells, 1.0 / dt))
    return ScalarField(solve_spd(op, rhs, tol=tol, max_iter=max_iter), grid)


def solve_forward(params: ModelParams, control: Control, *,
                  sources: StepSources | None = None,
                  tol: float = DEFAULT_TOL,
                  max_iter: int | None = None) -> Trajectory:
    """Run the full splitting scheme, v before u at every step.

    Returns the trajectory with mass and min-value series attached.
    Aborts with the step index on solver failure or non-finite values;
    warns when the solution undershoots zero beyond -1e-12 or when the
    mass drifts beyond solver tolerance.
    """
    grid, time = params.grid, params.time
    if control.grid is not grid and not control.grid.matches(grid):
        raise ValueError("control lives on a different grid")
    if control.n_steps != time.n_steps:
        raise ValueError(
            f"control has {control.n_steps} steps, time grid {time.n_steps}"
        )
    dt = time.dt
    us = [params.u0]
    vs = [params.v0]
    for n in range(time.n_steps):
        g_u = sources.g_u[n] if sources is not None else None
        g_v = sources.g_v[n] if sources is not None else None
        try:
            v_next = step_v(us[n], vs[n], control.values[n], dt,
                            source=g_v, tol=tol, max_iter=max_iter)
            u_next = step_u(us[n], v_next, dt,
                            source=g_u, tol=tol, max_iter=max_iter)
        except (RuntimeError, ValueError) as exc:
            raise ForwardSolveError(n, str(exc)) from exc
        us.append(u_next)
        vs.append(v_next)

    mass = np.array([integrate(u) for u in us])
    min_u = np.array([u.values.min() for u in us])
    min_v = np.array([v.values.min() for v in vs])

    scale = integrate(ScalarField(np.abs(params.u0.values), grid)) + 1e-2
    drift = float(np.abs(mass - mass[0]).max())
    if drift > 1e-11 * scale:
        warnings.warn(
            f"mass drift {drift:.3e} exceeds 1e-11 of scale {scale:.3e}; "
            "consider a tighter solver tolerance",
            RuntimeWarning,
        )
    worst = min(float(min_u.min()), float(min_v.min()))
    if worst < -UNDERSHOOT_TOL:
        warnings.warn(
            f"negative undershoot {worst:.3e}; dt likely exceeds the "
            "positivity bound (see dt_positivity_bound)",
            RuntimeWarning,
        )
    return Trajectory(u=us, v=vs, params=params,
                      mass=mass, min_u=min_u, min_v=min_v)


def coupled_step_refine(u_n: ScalarField, v_n: ScalarField, f_n, dt: float,
                        max_picard: int, tol: float, *,
                        solver_tol: float = DEFAULT_TOL):
    """Optional inner Picard loop making one step self-consistent.

    Re-evaluates the explicit couplings (u in the v-solve, v in the
    chemotaxis flux) until successive iterates differ by less than tol
    in max norm.  With max_picard = 1 this is exactly the default
    splitting.  Stagnation is reported with PicardStagnationWarning,
    not raised; the last iterate is returned either way.
    """
    if max_picard < 1:
        raise ValueError("max_picard must be at least 1")
    u_prev, v_prev = u_n, v_n
    u_lat = u_n
    for _ in range(max_picard):
        v_new = step_v(u_lat, v_n, f_n, dt, tol=solver_tol)
        u_new = step_u(u_n, v_new, dt, tol=solver_tol)
        diff = max(
            float(np.abs(u_new.values - u_prev.values).max()),
            float(np.abs(v_new.values - v_prev.values).max()),
        )
        if diff < tol:
            return u_new, v_new
        u_prev, v_prev = u_new, v_new
        u_lat = u_new
    if max_picard > 1:
        warnings.warn(
            f"picard stagnation: last update {diff:.3e} above tol {tol:.1e}",
            PicardStagnationWarning,
        )
    return u_prev, v_prev


def mass_series(traj: Trajectory) -> np.ndarray:
    """integrate(u[n]) over the whole domain for each time level."""
    return np.array([integrate(u) for u in traj.u])
