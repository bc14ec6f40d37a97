import numpy as np
import pytest

from chemoopt.grid import ScalarField, build_grid
from chemoopt.linsolve import (
    IndefiniteOperatorError,
    NotConvergedError,
    StencilOperator,
    solve_spd,
)
from helpers import dense_neumann_laplacian


def test_zero_rhs_gives_zero():
    grid = build_grid(4, 4, 1.0, 1.0)
    op = StencilOperator(grid, np.ones(16))
    x = solve_spd(op, np.zeros(16))
    assert np.all(x == 0.0)


def test_single_cell_scalar_equation():
    grid = build_grid(1, 1, 1.0, 1.0)
    op = StencilOperator(grid, np.array([5.0]))
    x = solve_spd(op, np.array([10.0]))
    assert x[0] == pytest.approx(2.0, rel=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_matches_dense_lu(seed):
    rng = np.random.default_rng(seed)
    grid = build_grid(4, 4, 1.0, 1.0)
    sigma = np.full(16, 2.0)
    op = StencilOperator(grid, sigma)
    rhs = rng.standard_normal(16)
    x = solve_spd(op, rhs, tol=1e-12)
    A = np.diag(sigma) - dense_neumann_laplacian(grid)
    want = np.linalg.solve(A, rhs)
    assert np.linalg.norm(x - want) <= 1e-10 * np.linalg.norm(want)


def test_residual_contract_on_return():
    rng = np.random.default_rng(7)
    grid = build_grid(9, 7, 1.0, 2.0)
    op = StencilOperator(grid, 0.5 + rng.random(grid.ncells))
    rhs = rng.standard_normal(grid.ncells)
    for tol in (1e-6, 1e-10, 1e-12):
        x = solve_spd(op, rhs, tol=tol)
        res = np.linalg.norm(op.apply(x) - rhs)
        assert res <= tol * np.linalg.norm(rhs)


def test_recovers_known_solution_in_a_norm():
    rng = np.random.default_rng(8)
    grid = build_grid(6, 6, 1.0, 1.0)
    op = StencilOperator(grid, 1.0 + rng.random(grid.ncells))
    x_known = rng.standard_normal(grid.ncells)
    tol = 1e-12
    x = solve_spd(op, op.apply(x_known), tol=tol)
    err = x - x_known
    a_norm = lambda y: np.sqrt(float(y @ op.apply(y)))
    assert a_norm(err) <= 10 * tol * max(a_norm(x_known), 1.0)


def test_scalar_field_round_trip():
    rng = np.random.default_rng(4)
    grid = build_grid(5, 3, 1.0, 1.0)
    op = StencilOperator(grid, np.full(grid.ncells, 3.0))
    rhs = ScalarField(rng.standard_normal(grid.ncells), grid)
    x = solve_spd(op, rhs)
    assert isinstance(x, ScalarField)
    assert np.linalg.norm(op.apply(x.values) - rhs.values) <= 1e-12 * np.linalg.norm(rhs.values)


def test_not_converged_error():
    rng = np.random.default_rng(2)
    grid = build_grid(8, 8, 1.0, 1.0)
    op = StencilOperator(grid, np.full(64, 1e-6))
    with pytest.raises(NotConvergedError, match="not converged"):
        solve_spd(op, rng.standard_normal(64), tol=1e-14, max_iter=2)


def test_indefinite_operator_detected():
    rng = np.random.default_rng(3)
    grid = build_grid(4, 4, 1.0, 1.0)
    op = StencilOperator(grid, np.full(16, -50.0))
    with pytest.raises(IndefiniteOperatorError):
        solve_spd(op, rng.standard_normal(16))


def test_operator_invariants():
    rng = np.random.default_rng(6)
    grid = build_grid(5, 5, 1.0, 1.0)
    sigma = 2.5
    op = StencilOperator(grid, np.full(25, sigma))
    const = np.full(25, 1.3)
    assert np.allclose(op.apply(const), sigma * const, rtol=1e-14)
    a, b = rng.standard_normal(25), rng.standard_normal(25)
    lhs = float(op.apply(a) @ b)
    rhs = float(a @ op.apply(b))
    assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1.0)


def test_deterministic_result():
    rng = np.random.default_rng(10)
    grid = build_grid(6, 4, 1.0, 1.0)
    op = StencilOperator(grid, 1.0 + rng.random(grid.ncells))
    rhs = rng.standard_normal(grid.ncells)
    x1 = solve_spd(op, rhs)
    x2 = solve_spd(op, rhs)
    assert np.array_equal(x1, x2)
