"""Constrained solver tests against dense linear-algebra oracles."""

import numpy as np
import pytest

from zklab.grid import PlanarGrid, PlanarField, inner_product, norm_l2
from zklab.solvers import (LinearOperator, SolverError, dense_min_rayleigh,
                           min_rayleigh, solve_symmetric)


@pytest.fixture
def grid():
    return PlanarGrid((16.0, 16.0), (48, 48))


@pytest.fixture
def helmholtz(grid):
    """(1 - Delta) with an attractive well: symmetric positive definite with
    an isolated bottom eigenvalue (a repulsive bump would leave the minimum
    buried in the essential cluster at 1 and stall the Lanczos iteration)."""
    X1, X2 = grid.mesh()
    V = -0.9 * np.exp(-(X1 ** 2 + X2 ** 2) / 4.0)

    def apply(f):
        K1, K2 = grid.kmesh()
        lin = np.fft.ifft2(f.spectrum * (1.0 + K1 ** 2 + K2 ** 2)).real
        return PlanarField(grid, lin + V * f.values)

    return LinearOperator(apply, symmetric=True, name="helmholtz+V")


def dense_matrix(op, grid):
    n = grid.points[0] * grid.points[1]
    cols = np.empty((n, n))
    e = np.zeros(n)
    for j in range(n):
        e[j] = 1.0
        cols[:, j] = op(PlanarField(grid, e.reshape(grid.points))).values.ravel()
        e[j] = 0.0
    return 0.5 * (cols + cols.T)


def test_symmetry_check(grid, helmholtz):
    assert helmholtz.check_symmetry(grid) < 1e-10

    def skew(f):
        from zklab.grid import spectral_derivative
        return spectral_derivative(f, 1)

    bad = LinearOperator(skew, symmetric=True, name="d1")
    with pytest.raises(SolverError):
        bad.check_symmetry(grid)


def test_solve_against_dense_oracle(grid, helmholtz):
    X1, X2 = grid.mesh()
    rhs = PlanarField(grid, np.exp(-(X1 ** 2 + X2 ** 2) / 2.0))
    x = solve_symmetric(helmholtz, rhs, tol=1e-10)
    A = dense_matrix(helmholtz, grid)
    x_dense = np.linalg.solve(A, rhs.values.ravel())
    rel = np.linalg.norm(x.values.ravel() - x_dense) / np.linalg.norm(x_dense)
    assert rel < 1e-8


def test_constrained_solve_stays_orthogonal(grid, helmholtz):
    X1, X2 = grid.mesh()
    rhs = PlanarField(grid, X1 * np.exp(-(X1 ** 2 + X2 ** 2) / 2.0))
    c = PlanarField(grid, np.exp(-(X1 ** 2 + X2 ** 2) / 3.0))
    x = solve_symmetric(helmholtz, rhs, ortho=[c], tol=1e-10)
    assert abs(inner_product(x, c)) < 1e-10 * norm_l2(x) * norm_l2(c)


def test_rhs_misalignment_detected(grid, helmholtz):
    X1, X2 = grid.mesh()
    c = PlanarField(grid, np.exp(-(X1 ** 2 + X2 ** 2) / 3.0))
    with pytest.raises(SolverError):
        solve_symmetric(helmholtz, c, ortho=[c], project_rhs=False)


def test_dependent_constraints_rejected(grid, helmholtz):
    X1, X2 = grid.mesh()
    c = PlanarField(grid, np.exp(-(X1 ** 2 + X2 ** 2) / 3.0))
    with pytest.raises(ValueError):
        solve_symmetric(helmholtz, c, ortho=[c, 2.0 * c])


def test_min_rayleigh_matches_dense(grid, helmholtz):
    mu = min_rayleigh(helmholtz, grid, norm="l2", tol=1e-12)
    mu_dense = dense_min_rayleigh(helmholtz, grid, norm="l2")
    assert mu == pytest.approx(mu_dense, rel=1e-8)


def test_min_rayleigh_h1_matches_dense(grid, helmholtz):
    X1, X2 = grid.mesh()
    c = PlanarField(grid, np.exp(-(X1 ** 2 + X2 ** 2) / 3.0))
    mu = min_rayleigh(helmholtz, grid, norm="h1", ortho=[c], tol=1e-12)
    mu_dense = dense_min_rayleigh(helmholtz, grid, norm="h1", ortho=[c])
    assert mu == pytest.approx(mu_dense, rel=1e-7)


def test_min_rayleigh_seeded_deterministic(grid, helmholtz):
    a = min_rayleigh(helmholtz, grid, norm="l2", seed=7)
    b = min_rayleigh(helmholtz, grid, norm="l2", seed=7)
    assert a == b


def test_dense_oracle_grid_limit(helmholtz):
    big = PlanarGrid((16.0, 16.0), (256, 256))
    with pytest.raises(ValueError):
        dense_min_rayleigh(helmholtz, big)
