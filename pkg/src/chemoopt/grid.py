"""Cell-centered rectangular grid and the discrete spatial operators.

The domain is an axis-aligned rectangle [0, lx] x [0, ly] split into
nx * ny uniform cells.  Fields live at cell centers and are stored
row-major, index = j*nx + i, so that outputs are bit-stable.

Two operators are provided, both in conservative (face flux) form with
zero-flux boundary closure, the discrete counterpart of homogeneous
Neumann conditions du/dn = dv/dn = 0:

* ``laplacian_apply``     5-point Laplacian, mirror ghost cells.
* ``chemotaxis_divergence``  div(u grad v) with arithmetic-mean face
  values for u.  The arithmetic mean keeps the operator differentiable
  in (u, v), which the discrete adjoint requires; upwinding would not.

Because every interior face flux enters its two neighbor cells with
opposite signs and boundary faces carry no flux, the cell sum of either
operator telescopes to zero exactly.  That is what makes the time
stepping in :mod:`chemoopt.forward` conservative in u.

Masks for the control subdomain and the observation subdomain are plain
boolean per-cell arrays, rasterized from rectangles by cell-center
membership.  The two subdomains may overlap arbitrarily.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid",
    "ScalarField",
    "build_grid",
    "laplacian_apply",
    "chemotaxis_divergence",
    "integrate",
]


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform cell-centered mesh with control and observation masks."""

    nx: int
    ny: int
    lx: float
    ly: float
    hx: float
    hy: float
    mask_c: np.ndarray
    mask_d: np.ndarray

    @property
    def ncells(self) -> int:
        return self.nx * self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    def cell_centers(self):
        """Return (x, y) center coordinates as flat row-major arrays."""
        xs = (np.arange(self.nx) + 0.5) * self.hx
        ys = (np.arange(self.ny) + 0.5) * self.hy
        X, Y = np.meshgrid(xs, ys)
        return X.ravel(), Y.ravel()

    def matches(self, other: "Grid") -> bool:
        """Structural compatibility (same cells and masks)."""
        if self is other:
            return True
        return (
            self.nx == other.nx
            and self.ny == other.ny
            and self.lx == other.lx
            and self.ly == other.ly
            and np.array_equal(self.mask_c, other.mask_c)
            and np.array_equal(self.mask_d, other.mask_d)
        )


@dataclass(frozen=True, eq=False)
class ScalarField:
    """A cell-centered scalar field bound to its grid.

    Entries must be finite; every operation that returns a field goes
    through this constructor, so NaN/Inf cannot propagate silently.
    """

    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        object.__setattr__(self, "values", values)
        if values.size != self.grid.ncells:
            raise ValueError(
                f"field has {values.size} entries, grid has {self.grid.ncells} cells"
            )
        if not np.isfinite(values).all():
            raise ValueError("field contains non-finite entries")

    def as_2d(self) -> np.ndarray:
        """(ny, nx) view of the values."""
        return self.values.reshape(self.grid.ny, self.grid.nx)


def _rasterize_mask(grid_shape, hx, hy, spec, name: str) -> np.ndarray:
    """Build a boolean cell mask from a spec.

    ``spec`` may be None (whole domain), a rectangle (x0, y0, x1, y1)
    rasterized by cell-center membership, or an explicit boolean array.
    """
    nx, ny = grid_shape
    if spec is None:
        return np.ones(nx * ny, dtype=bool)
    if isinstance(spec, (tuple, list)) and len(spec) == 4 and np.isscalar(spec[0]):
        x0, y0, x1, y1 = (float(s) for s in spec)
        xs = (np.arange(nx) + 0.5) * hx
        ys = (np.arange(ny) + 0.5) * hy
        X, Y = np.meshgrid(xs, ys)
        inside = (X >= x0) & (X <= x1) & (Y >= y0) & (Y <= y1)
        return inside.ravel()
    mask = np.asarray(spec, dtype=bool).ravel()
    if mask.size != nx * ny:
        raise ValueError(
            f"{name} has {mask.size} entries, expected {nx * ny}"
        )
    return mask


def build_grid(nx, ny, lx, ly, mask_c_spec=None, mask_d_spec=None) -> Grid:
    """Construct a validated grid.

    Parameters
    ----------
    nx, ny : int
        Cell counts per axis, at least 1.
    lx, ly : float
        Domain side lengths, positive.
    mask_c_spec, mask_d_spec
        Control / observation subdomain: None for the whole domain, a
        rectangle (x0, y0, x1, y1), or an explicit boolean array of
        length nx*ny.  Empty masks are rejected.
    """
    nx, ny = int(nx), int(ny)
    lx, ly = float(lx), float(ly)
    if nx < 1 or ny < 1:
        raise ValueError(f"cell counts must be positive, got nx={nx}, ny={ny}")
    if lx <= 0 or ly <= 0:
        raise ValueError(f"domain lengths must be positive, got lx={lx}, ly={ly}")
    hx, hy = lx / nx, ly / ny
    mask_c = _rasterize_mask((nx, ny), hx, hy, mask_c_spec, "control mask")
    mask_d = _rasterize_mask((nx, ny), hx, hy, mask_d_spec, "observation mask")
    if not mask_c.any():
        raise ValueError("empty control mask")
    if not mask_d.any():
        raise ValueError("empty observation mask")
    return Grid(nx=nx, ny=ny, lx=lx, ly=ly, hx=hx, hy=hy,
                mask_c=mask_c, mask_d=mask_d)


def _require_same_grid(a: ScalarField, b: ScalarField):
    if not a.grid.matches(b.grid):
        raise ValueError("fields live on different grids")


def laplacian_raw(values: np.ndarray, grid: Grid) -> np.ndarray:
    """5-point Neumann Laplacian on a raw flat array (no field wrapping).

    Conservative form: per interior face the flux (a_across - a_here)/h
    enters the two adjacent cells with opposite signs; boundary faces
    carry zero flux (mirror ghosts).  Constants map to zero exactly and
    the cell sum of the output is exactly zero.
    """
    a = values.reshape(grid.ny, grid.nx)
    out = np.zeros_like(a)
    if grid.nx > 1:
        dx = (a[:, 1:] - a[:, :-1]) / grid.hx**2
        out[:, :-1] += dx
        out[:, 1:] -= dx
    if grid.ny > 1:
        dy = (a[1:, :] - a[:-1, :]) / grid.hy**2
        out[:-1, :] += dy
        out[1:, :] -= dy
    return out.ravel()


def laplacian_apply(field: ScalarField) -> ScalarField:
    """Apply the 5-point Neumann Laplacian to a field."""
    return ScalarField(laplacian_raw(field.values, field.grid), field.grid)


def chemotaxis_divergence_raw(u: np.ndarray, v: np.ndarray, grid: Grid) -> np.ndarray:
    """div(u grad v) in face-flux form on raw flat arrays.

    Face flux: mean(u_here, u_across) * (v_across - v_here)/h, zero on
    boundary faces.  Output is the net flux per cell divided by the cell
    area; its cell sum telescopes to zero.
    """
    u2 = u.reshape(grid.ny, grid.nx)
    v2 = v.reshape(grid.ny, grid.nx)
    out = np.zeros_like(u2)
    if grid.nx > 1:
        fx = 0.5 * (u2[:, 1:] + u2[:, :-1]) * (v2[:, 1:] - v2[:, :-1]) / grid.hx**2
        out[:, :-1] += fx
        out[:, 1:] -= fx
    if grid.ny > 1:
        fy = 0.5 * (u2[1:, :] + u2[:-1, :]) * (v2[1:, :] - v2[:-1, :]) / grid.hy**2
        out[:-1, :] += fy
        out[1:, :] -= fy
    return out.ravel()


def chemotaxis_divergence(u: ScalarField, v: ScalarField) -> ScalarField:
    """div(u grad v) with zero-flux boundaries; conservative in u."""
    _require_same_grid(u, v)
    return ScalarField(chemotaxis_divergence_raw(u.values, v.values, u.grid), u.grid)


def grad_dot_grad_raw(v: np.ndarray, z: np.ndarray, grid: Grid) -> np.ndarray:
    """Cell values of grad v . grad z from face differences.

    For each face the product of the two across-minus-here differences
    is split evenly between the adjacent cells.  This is the exact
    transpose (negated) of the u-slot of ``chemotaxis_divergence_raw``
    under the uniform cell inner product, which the discrete adjoint in
    :mod:`chemoopt.adjoint` relies on.
    """
    v2 = v.reshape(grid.ny, grid.nx)
    z2 = z.reshape(grid.ny, grid.nx)
    out = np.zeros_like(v2)
    if grid.nx > 1:
        tx = (v2[:, 1:] - v2[:, :-1]) * (z2[:, 1:] - z2[:, :-1]) / (2.0 * grid.hx**2)
        out[:, :-1] += tx
        out[:, 1:] += tx
    if grid.ny > 1:
        ty = (v2[1:, :] - v2[:-1, :]) * (z2[1:, :] - z2[:-1, :]) / (2.0 * grid.hy**2)
        out[:-1, :] += ty
        out[1:, :] += ty
    return out.ravel()


def face_gradient_max(v: np.ndarray, grid: Grid) -> float:
    """Sup norm of the face-difference gradient, max |v_across - v_here| / h."""
    v2 = v.reshape(grid.ny, grid.nx)
    g = 0.0
    if grid.nx > 1:
        g = max(g, float(np.abs(v2[:, 1:] - v2[:, :-1]).max()) / grid.hx)
    if grid.ny > 1:
        g = max(g, float(np.abs(v2[1:, :] - v2[:-1, :]).max()) / grid.hy)
    return g


def integrate(field: ScalarField, mask=None) -> float:
    """Integral over the masked cells, hx*hy * sum of values.

    ``mask`` is a boolean per-cell array or None for the whole domain.
    """
    grid = field.grid
    if mask is None:
        return grid.cell_area * float(field.values.sum())
    mask = np.asarray(mask, dtype=bool).ravel()
    if mask.size != grid.ncells:
        raise ValueError(
            f"mask has {mask.size} entries, grid has {grid.ncells} cells"
        )
    return grid.cell_area * float(field.values[mask].sum())
