"""Tracking-plus-cost objective for the bilinear control problem.

J(u, v, f) = alpha_u/2 * int_{Qd} |u - u_d|^2
           + alpha_v/2 * int_{Qd} |v - v_d|^2
           + N/4      * int_{Qc} |f|^4

Time integrals use the right-endpoint rectangle rule (state sampled at
t_{n+1}, control constant on each interval); this matches the control
convention so that the discrete adjoint is the exact transpose of the
scheme.  Trapezoid weights would double-count endpoints and break the
machine-tight gradient tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .forward import Control, Trajectory
from .grid import Grid, ScalarField

__all__ = ["CostWeights", "DesiredStates", "CostBreakdown", "evaluate_j"]


@dataclass(frozen=True)
class CostWeights:
    """Nonnegative weights: alpha_u, alpha_v for tracking, n_cost for the control."""

    alpha_u: float
    alpha_v: float
    n_cost: float

    def __post_init__(self):
        if self.alpha_u < 0 or self.alpha_v < 0 or self.n_cost < 0:
            raise ValueError("cost weights must be nonnegative")
        if self.alpha_u == 0 and self.alpha_v == 0 and self.n_cost == 0:
            raise ValueError("degenerate objective: all weights are zero")


@dataclass(frozen=True, eq=False)
class DesiredStates:
    """Per-step desired states, one field per interval (values outside
    the observation mask are ignored by the objective)."""

    u_d: list
    v_d: list

    def __post_init__(self):
        if len(self.u_d) != len(self.v_d):
            raise ValueError("u_d and v_d must have the same number of steps")

    @property
    def n_steps(self) -> int:
        return len(self.u_d)

    @classmethod
    def constant_in_time(cls, u_field: ScalarField, v_field: ScalarField,
                         n_steps: int) -> "DesiredStates":
        """Replicate a single desired field over all steps."""
        return cls([u_field] * n_steps, [v_field] * n_steps)


class CostBreakdown(NamedTuple):
    total: float
    tracking_u: float
    tracking_v: float
    cost_f: float


def evaluate_j(traj: Trajectory, control: Control, weights: CostWeights,
               desired: DesiredStates) -> CostBreakdown:
    """Evaluate the objective and its three parts.

    Returns (total, tracking_u, tracking_v, cost_f) with
    total = tracking_u + tracking_v + cost_f.
    """
    grid: Grid = traj.params.grid
    n_steps = traj.n_steps
    if desired.n_steps != n_steps:
        raise ValueError(
            f"desired states have {desired.n_steps} steps, trajectory {n_steps}"
        )
    if control.n_steps != n_steps:
        raise ValueError(
            f"control has {control.n_steps} steps, trajectory {n_steps}"
        )
    if n_steps and not desired.u_d[0].grid.matches(grid):
        raise ValueError("desired states live on a different grid")
    dt = traj.params.time.dt
    area = grid.cell_area
    md = grid.mask_d
    mc = grid.mask_c

    tu = 0.0
    tv = 0.0
    cf = 0.0
    for n in range(n_steps):
        du = traj.u[n + 1].values[md] - desired.u_d[n].values[md]
        dv = traj.v[n + 1].values[md] - desired.v_d[n].values[md]
        fc = control.values[n][mc]
        tu += float(du @ du)
        tv += float(dv @ dv)
        cf += float((fc**2) @ (fc**2))
    tu *= 0.5 * weights.alpha_u * dt * area
    tv *= 0.5 * weights.alpha_v * dt * area
    cf *= 0.25 * weights.n_cost * dt * area
    return CostBreakdown(tu + tv + cf, tu, tv, cf)
