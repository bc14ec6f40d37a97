"""Matrix-free SPD solves for the implicit diffusion steps.

The implicit operators of the time stepper all have the form
A = diag(sigma) - Lap_h with the Neumann 5-point Laplacian, applied
matrix-free; A is SPD whenever min(sigma) > 0 since -Lap_h is PSD.
Solved by conjugate gradients with Jacobi preconditioning, fixed
iteration order, no restarts, so results are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, ScalarField, laplacian_raw

__all__ = [
    "StencilOperator",
    "solve_spd",
    "NotConvergedError",
    "IndefiniteOperatorError",
    "DEFAULT_TOL",
]

DEFAULT_TOL = 1e-12


class NotConvergedError(RuntimeError):
    """CG exhausted max_iter; SPD violation or too-tight tolerance."""


class IndefiniteOperatorError(RuntimeError):
    """A CG search-direction inner product was nonpositive."""


@dataclass(frozen=True, eq=False)
class StencilOperator:
    """A = diag(sigma) - Lap_h, applied matrix-free."""

    grid: Grid
    sigma: np.ndarray

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=float).ravel()
        if sigma.size == 1:
            sigma = np.full(self.grid.ncells, sigma[0])
        if sigma.size != self.grid.ncells:
            raise ValueError("sigma length does not match grid")
        object.__setattr__(self, "sigma", sigma)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.sigma * x - laplacian_raw(x, self.grid)

    def diagonal(self) -> np.ndarray:
        """Diagonal of A, used as the Jacobi preconditioner."""
        grid = self.grid
        cx = np.full(grid.nx, 2.0)
        cx[0] -= 1.0
        cx[-1] -= 1.0
        cy = np.full(grid.ny, 2.0)
        cy[0] -= 1.0
        cy[-1] -= 1.0
        stencil = cx[None, :] / grid.hx**2 + cy[:, None] / grid.hy**2
        return self.sigma + stencil.ravel()


def solve_spd(op: StencilOperator, rhs, tol: float = DEFAULT_TOL,
              max_iter: int | None = None):
    """Solve A x = rhs by Jacobi-preconditioned CG.

    On success ||A x - rhs||_2 <= tol * ||rhs||_2.  Raises
    NotConvergedError when max_iter is exceeded and
    IndefiniteOperatorError when p'Ap <= 0 (the operator is not SPD).

    ``rhs`` may be a ScalarField or a raw array; the result matches the
    input kind.
    """
    wrap = isinstance(rhs, ScalarField)
    b = rhs.values if wrap else np.asarray(rhs, dtype=float).ravel()
    grid = op.grid
    if b.size != grid.ncells:
        raise ValueError("rhs length does not match grid")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter is None:
        max_iter = 10 * grid.ncells + 100

    diag = op.diagonal()
    if np.any(diag <= 0):
        raise IndefiniteOperatorError("operator diagonal has nonpositive entries")

    bnorm = float(np.linalg.norm(b))
    x = np.zeros_like(b)
    if bnorm == 0.0:
        return ScalarField(x, grid) if wrap else x

    r = b.copy()
    z = r / diag
    p = z.copy()
    rz = float(r @ z)
    target = tol * bnorm
    for _ in range(max_iter):
        Ap = op.apply(p)
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise IndefiniteOperatorError(
                f"indefinite operator: p'Ap = {pAp:.3e}"
            )
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if float(np.linalg.norm(r)) <= target:
            return ScalarField(x, grid) if wrap else x
        z = r / diag
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NotConvergedError(
        f"not converged after {max_iter} iterations, "
        f"residual {float(np.linalg.norm(r)) / bnorm:.3e} of target {tol:.1e}"
    )
