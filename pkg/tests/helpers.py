"""Shared test utilities: dense oracles and manufactured solutions.

The dense assemblies here are deliberately naive (explicit loops over
cells and faces) and independent of the library's vectorized stencils;
they are the oracles the fast paths are checked against.
"""

import numpy as np

from chemoopt.forward import Control, ModelParams, TimeGrid
from chemoopt.functional import CostWeights, DesiredStates
from chemoopt.grid import Grid, ScalarField, build_grid


def face_list(grid: Grid):
    """All interior faces as (cell_p, cell_q, h_along) triples."""
    faces = []
    for j in range(grid.ny):
        for i in range(grid.nx - 1):
            faces.append((j * grid.nx + i, j * grid.nx + i + 1, grid.hx))
    for j in range(grid.ny - 1):
        for i in range(grid.nx):
            faces.append((j * grid.nx + i, (j + 1) * grid.nx + i, grid.hy))
    return faces


def dense_neumann_laplacian(grid: Grid) -> np.ndarray:
    """Dense 5-point Neumann Laplacian assembled face by face."""
    n = grid.ncells
    L = np.zeros((n, n))
    for p, q, h in face_list(grid):
        w = 1.0 / h**2
        L[p, p] -= w
        L[p, q] += w
        L[q, q] -= w
        L[q, p] += w
    return L


def dense_chemo_wrt_u(v: np.ndarray, grid: Grid) -> np.ndarray:
    """Matrix M with (M w) = div_h(w grad v), w the density slot."""
    n = grid.ncells
    M = np.zeros((n, n))
    for p, q, h in face_list(grid):
        dv = (v[q] - v[p]) / h**2
        M[p, p] += 0.5 * dv
        M[p, q] += 0.5 * dv
        M[q, p] -= 0.5 * dv
        M[q, q] -= 0.5 * dv
    return M


def dense_chemo_wrt_v(u: np.ndarray, grid: Grid) -> np.ndarray:
    """Matrix M with (M z) = div_h(u grad z), z the chemical slot."""
    n = grid.ncells
    M = np.zeros((n, n))
    for p, q, h in face_list(grid):
        uf = 0.5 * (u[p] + u[q]) / h**2
        M[p, q] += uf
        M[p, p] -= uf
        M[q, p] += uf
        M[q, q] -= uf
    return M


def smooth_bumps(grid: Grid, rng: np.random.Generator, base=0.05,
                 n_bumps=3, amplitude=1.0) -> ScalarField:
    """Nonnegative Gaussian-bump mixture, smooth at the grid scale."""
    x, y = grid.cell_centers()
    values = np.full(grid.ncells, float(base))
    for _ in range(n_bumps):
        cx = rng.uniform(0.15, 0.85) * grid.lx
        cy = rng.uniform(0.15, 0.85) * grid.ly
        width = rng.uniform(0.12, 0.3) * min(grid.lx, grid.ly)
        values += rng.uniform(0.3, 1.0) * amplitude * np.exp(
            -((x - cx) ** 2 + (y - cy) ** 2) / (2 * width**2))
    return ScalarField(values, grid)


def random_problem(rng: np.random.Generator, nx=5, ny=4, n_steps=6,
                   t_final=0.5, control_amp=0.8):
    """A small random tracking problem with partial masks."""
    grid = build_grid(nx, ny, 1.0, 1.2,
                      mask_c_spec=(0.0, 0.0, 0.6, 1.2),
                      mask_d_spec=(0.3, 0.2, 1.0, 1.0))
    time = TimeGrid(t_final, n_steps)
    u0 = ScalarField(0.5 + rng.random(grid.ncells), grid)
    v0 = ScalarField(0.3 + rng.random(grid.ncells), grid)
    params = ModelParams(grid, time, u0, v0)
    control = Control(control_amp * rng.standard_normal((n_steps, grid.ncells)),
                      grid, n_steps)
    weights = CostWeights(1.3, 0.7, 2.0)
    desired = DesiredStates(
        [ScalarField(rng.random(grid.ncells), grid) for _ in range(n_steps)],
        [ScalarField(rng.random(grid.ncells), grid) for _ in range(n_steps)],
    )
    return params, control, weights, desired


class ForwardManufactured:
    """Smooth exact solution of the state system with residual sources.

    On the unit square with zero-flux boundaries:
        u(t,x,y) = 2 + 0.5 exp(-t)  cos(pi x) cos(pi y)
        v(t,x,y) = 1 + 0.4 exp(-2t) cos(2 pi x) cos(pi y)
        f(x,y)   = 0.3 cos(pi x) cos(pi y)
    The sources g_u = du/dt - Lap u - div(u grad v) and
    g_v = dv/dt - Lap v + v - u - f v close the system exactly.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        self.x, self.y = grid.cell_centers()
        self.f = 0.3 * np.cos(np.pi * self.x) * np.cos(np.pi * self.y)

    def u(self, t):
        return 2.0 + 0.5 * np.exp(-t) * np.cos(np.pi * self.x) * np.cos(np.pi * self.y)

    def v(self, t):
        return 1.0 + 0.4 * np.exp(-2 * t) * np.cos(2 * np.pi * self.x) * np.cos(np.pi * self.y)

    def g_u(self, t):
        x, y, pi = self.x, self.y, np.pi
        cu = 0.5 * np.exp(-t)
        cv = 0.4 * np.exp(-2 * t)
        du_dt = -cu * np.cos(pi * x) * np.cos(pi * y)
        lap_u = -cu * 2 * pi**2 * np.cos(pi * x) * np.cos(pi * y)
        ux = -cu * pi * np.sin(pi * x) * np.cos(pi * y)
        uy = -cu * pi * np.cos(pi * x) * np.sin(pi * y)
        vx = -cv * 2 * pi * np.sin(2 * pi * x) * np.cos(pi * y)
        vy = -cv * pi * np.cos(2 * pi * x) * np.sin(pi * y)
        lap_v = -cv * 5 * pi**2 * np.cos(2 * pi * x) * np.cos(pi * y)
        chemo = ux * vx + uy * vy + self.u(t) * lap_v
        return du_dt - lap_u - chemo

    def g_v(self, t):
        x, y, pi = self.x, self.y, np.pi
        cv = 0.4 * np.exp(-2 * t)
        dv_dt = -2 * cv * np.cos(2 * pi * x) * np.cos(pi * y)
        lap_v = -cv * 5 * pi**2 * np.cos(2 * pi * x) * np.cos(pi * y)
        return dv_dt - lap_v + self.v(t) - self.u(t) - self.f * self.v(t)


def forward_mms_error(nx, n_steps, t_final):
    """Sup-norm error of the scheme against the manufactured solution."""
    from chemoopt.forward import StepSources, solve_forward

    grid = build_grid(nx, nx, 1.0, 1.0)
    mms = ForwardManufactured(grid)
    time = TimeGrid(t_final, n_steps)
    params = ModelParams(grid, time,
                         ScalarField(mms.u(0.0), grid),
                         ScalarField(mms.v(0.0), grid))
    control = Control(np.tile(mms.f, (n_steps, 1)), grid, n_steps)
    dt = time.dt
    sources = StepSources(
        g_u=[ScalarField(mms.g_u((n + 1) * dt), grid) for n in range(n_steps)],
        g_v=[ScalarField(mms.g_v((n + 1) * dt), grid) for n in range(n_steps)],
    )
    traj = solve_forward(params, control, sources=sources)
    return (np.abs(traj.u[n_steps].values - mms.u(t_final)).max()
            + np.abs(traj.v[n_steps].values - mms.v(t_final)).max())


class AdjointManufactured:
    """Smooth exact multipliers with zero terminal values.

        lam(t,x,y) = 0.3 (T-t) cos(pi x) cos(pi y)
        eta(t,x,y) = 0.2 (T-t) cos(2 pi x) cos(pi y)

    The sources close the backward system with coefficient fields taken
    from :class:`ForwardManufactured`:
        s_u = -d(lam)/dt - Lap lam + grad lam . grad v - eta
        s_v = -d(eta)/dt - Lap eta + eta - f eta - div(u grad lam)
    """

    def __init__(self, mms: ForwardManufactured, t_final: float):
        self.mms = mms
        self.T = t_final
        self.x, self.y = mms.x, mms.y

    def lam(self, t):
        return 0.3 * (self.T - t) * np.cos(np.pi * self.x) * np.cos(np.pi * self.y)

    def eta(self, t):
        return 0.2 * (self.T - t) * np.cos(2 * np.pi * self.x) * np.cos(np.pi * self.y)

    def s_u(self, t):
        x, y, pi = self.x, self.y, np.pi
        tau = self.T - t
        dlam_dt = -0.3 * np.cos(pi * x) * np.cos(pi * y)
        lap_lam = -0.3 * tau * 2 * pi**2 * np.cos(pi * x) * np.cos(pi * y)
        lx = -0.3 * tau * pi * np.sin(pi * x) * np.cos(pi * y)
        ly = -0.3 * tau * pi * np.cos(pi * x) * np.sin(pi * y)
        cv = 0.4 * np.exp(-2 * t)
        vx = -cv * 2 * pi * np.sin(2 * pi * x) * np.cos(pi * y)
        vy = -cv * pi * np.cos(2 * pi * x) * np.sin(pi * y)
        return -dlam_dt - lap_lam + lx * vx + ly * vy - self.eta(t)

    def s_v(self, t):
        x, y, pi = self.x, self.y, np.pi
        tau = self.T - t
        deta_dt = -0.2 * np.cos(2 * pi * x) * np.cos(pi * y)
        lap_eta = -0.2 * tau * 5 * pi**2 * np.cos(2 * pi * x) * np.cos(pi * y)
        lx = -0.3 * tau * pi * np.sin(pi * x) * np.cos(pi * y)
        ly = -0.3 * tau * pi * np.cos(pi * x) * np.sin(pi * y)
        lap_lam = -0.3 * tau * 2 * pi**2 * np.cos(pi * x) * np.cos(pi * y)
        cu = 0.5 * np.exp(-t)
        ux = -cu * pi * np.sin(pi * x) * np.cos(pi * y)
        uy = -cu * pi * np.cos(pi * x) * np.sin(pi * y)
        div_u_grad_lam = ux * lx + uy * ly + self.mms.u(t) * lap_lam
        eta = self.eta(t)
        return -deta_dt - lap_eta + eta - self.mms.f * eta - div_u_grad_lam
