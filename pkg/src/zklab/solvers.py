"""Constrained symmetric linear solves and Rayleigh-quotient minimization.

Operators act on PlanarField; internally everything is flattened and fed to
scipy's MINRES / LOBPCG with orthogonal projection against supplied
near-kernel directions baked into the operator, so every Krylov iterate
stays in the constrained subspace.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .grid import PlanarField, PlanarGrid, GridMismatchError, inner_product


class SolverError(RuntimeError):
    """Linear or eigen solve failed; carries the residual history."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


@dataclass
class LinearOperator:
    """Action on PlanarField plus a symmetry flag."""

    apply: Callable[[PlanarField], PlanarField]
    symmetric: bool = True
    name: str = ""

    def __call__(self, f: PlanarField) -> PlanarField:
        return self.apply(f)

    def check_symmetry(self, grid: PlanarGrid, rng=None, pairs: int = 4,
                       rtol: float = 1e-10) -> float:
        rng = rng or np.random.default_rng(0)
        worst = 0.0
        for _ in range(pairs):
            f = PlanarField(grid, rng.standard_normal(grid.points))
            g = PlanarField(grid, rng.standard_normal(grid.points))
            a = inner_product(self(f), g)
            b = inner_product(f, self(g))
            scale = max(abs(a), abs(b), 1e-300)
            worst = max(worst, abs(a - b) / scale)
        if self.symmetric and worst > rtol:
            raise SolverError(f"operator {self.name or '?'} fails symmetry check: {worst:.2e}")
        return worst


def _orthonormal_basis(ortho: Sequence[PlanarField], weight: float) -> np.ndarray:
    if not ortho:
        return np.empty((ortho[0].values.size if ortho else 0, 0))
    mat = np.stack([v.values.ravel() for v in ortho], axis=1) * np.sqrt(weight)
    q, r = np.linalg.qr(mat)
    keep = np.abs(np.diag(r)) > 1e-12 * np.abs(r).max()
    if not np.all(keep):
        raise ValueError("ortho directions are linearly dependent")
    return q


def _helmholtz_preconditioner(grid: PlanarGrid) -> np.ndarray:
    K1, K2 = grid.kmesh()
    return 1.0 / (1.0 + K1 ** 2 + K2 ** 2)


def solve_symmetric(op: LinearOperator, rhs: PlanarField,
                    ortho: Sequence[PlanarField] = (),
                    tol: float = 1e-9, maxiter: int = 2000,
                    project_rhs: bool = True,
                    precondition: bool = True) -> PlanarField:
    """Solve op(x) = rhs with x (and the Krylov space) orthogonal to `ortho`.

    Projection is applied inside every operator application, the right-hand
    side is pre-projected (or validated when project_rhs=False), and the
    answer satisfies ||op(x) - rhs|| / ||rhs|| < tol in the projected sense.
    """
    if not op.symmetric:
        raise ValueError("solve_symmetric requires a symmetric operator")
    grid = rhs.grid
    for v in ortho:
        if not v.grid.compatible(grid):
            raise GridMismatchError("ortho direction on a different grid")
    w = grid.cell_area
    b = rhs.values.ravel() * np.sqrt(w)
    basis = _orthonormal_basis(ortho, w) if ortho else None

    def project(vec):
        if basis is None:
            return vec
        return vec - basis @ (basis.T @ vec)

    misalignment = np.linalg.norm(b - project(b)) / max(np.linalg.norm(b), 1e-300)
    if not project_rhs and misalignment > 1e-8:
        raise SolverError(
            f"rhs has component {misalignment:.2e} along the near-kernel and "
            "projection was not requested")
    b = project(b)

    def matvec(x):
        xf = PlanarField(grid, project(x).reshape(grid.points) / np.sqrt(w))
        y = op(xf).values.ravel() * np.sqrt(w)
        return project(y)

    n = b.size
    A = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
    M = None
    if precondition:
        pre = _helmholtz_preconditioner(grid)

        def mvec(x):
            xf = project(x).reshape(grid.points)
            y = np.fft.ifft2(np.fft.fft2(xf) * pre).real.ravel()
            return project(y)

        M = spla.LinearOperator((n, n), matvec=mvec, dtype=float)

    history: list[float] = []
    bnorm = np.linalg.norm(b)

    def cb(xk):
        history.append(np.linalg.norm(matvec(xk) - b) / max(bnorm, 1e-300))

    x, info = spla.minres(A, b, rtol=tol * 1e-2, maxiter=maxiter, M=M, callback=cb)
    x = project(x)
    res = np.linalg.norm(matvec(x) - b) / max(bnorm, 1e-300)
    if res > tol:
        # One warm restart; minres's internal criterion uses a different norm
        # and can report convergence slightly short of the requested residual.
        x, info = spla.minres(A, b, x0=x, rtol=tol * 1e-3, maxiter=maxiter,
                              M=M, callback=cb)
        x = project(x)
        res = np.linalg.norm(matvec(x) - b) / max(bnorm, 1e-300)
    if res > tol:
        raise SolverError(
            f"MINRES stalled at relative residual {res:.2e} (target {tol:.1e}, info={info})",
            history)
    return PlanarField(grid, x.reshape(grid.points) / np.sqrt(w))


def _h1_matvec(grid: PlanarGrid):
    K1, K2 = grid.kmesh()
    sym = 1.0 + K1 ** 2 + K2 ** 2

    def bv(x):
        return np.fft.ifft2(np.fft.fft2(x.reshape(grid.points)) * sym).real.ravel()

    return bv


def min_rayleigh(op: LinearOperator, grid: PlanarGrid, norm: str = "l2",
                 ortho: Sequence[PlanarField] = (), tol: float = 1e-10,
                 maxiter: int = 20000, seed: int = 0) -> float:
    """Minimum of (op f, f)/||f||^2 over f L2-orthogonal to `ortho`.

    norm is 'l2' or 'h1'.  The h1 case is symmetrized to a standard
    eigenproblem through the spectral square root of (1 - Delta), which
    makes the operator a bounded perturbation of the identity.  Constraints
    are enforced by orthogonal projection baked into the operator, with the
    projected-out subspace shifted well above the spectrum of interest, and
    the smallest eigenvalue is extracted by a Lanczos iteration started
    from a seeded random vector.
    """
    if norm not in ("l2", "h1"):
        raise ValueError("norm must be 'l2' or 'h1'")
    if not op.symmetric:
        raise ValueError("min_rayleigh requires a symmetric operator")
    w = grid.cell_area
    n = grid.points[0] * grid.points[1]
    if norm == "h1":
        K1, K2 = grid.kmesh()
        root = np.sqrt(1.0 + K1 ** 2 + K2 ** 2)

        def half(x, sym):
            return np.fft.ifft2(np.fft.fft2(x.reshape(grid.points)) * sym).real.ravel()

        def act(x):
            f = PlanarField(grid, half(x, 1.0 / root).reshape(grid.points))
            return half(op(f).values, 1.0 / root)

        constraints = [PlanarField(grid, half(v.values, 1.0 / root).reshape(grid.points))
                       for v in ortho]
        shift = 10.0
    else:
        def act(x):
            return op(PlanarField(grid, x.reshape(grid.points))).values.ravel()

        constraints = list(ortho)
        K1, K2 = grid.kmesh()
        shift = 10.0 * (1.0 + float((K1 ** 2 + K2 ** 2).max()))

    basis = _orthonormal_basis(constraints, w) if constraints else None

    def project(x):
        if basis is None:
            return x
        return x - basis @ (basis.T @ x)

    def matvec(x):
        px = project(x)
        return project(act(px)) + shift * (x - px)

    A = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
    v0 = project(np.random.default_rng(seed).standard_normal(n))
    try:
        vals = spla.eigsh(A, k=1, which="SA", tol=tol, maxiter=maxiter,
                          v0=v0, return_eigenvectors=False)
    except spla.ArpackNoConvergence as exc:
        raise SolverError(f"Lanczos iteration failed to converge: {exc}") from exc
    if not np.all(np.isfinite(vals)):
        raise SolverError("non-finite Ritz values from Lanczos iteration")
    return float(vals[0])


def dense_min_rayleigh(op: LinearOperator, grid: PlanarGrid, norm: str = "l2",
                       ortho: Sequence[PlanarField] = ()) -> float:
    """Dense-matrix oracle for min_rayleigh on coarse grids.

    Builds the operator matrix column by column, restricts to the orthogonal
    complement of the constraints, and calls a dense symmetric eigensolver.
    Independent path from the LOBPCG iteration.
    """
    n = grid.points[0] * grid.points[1]
    if n > 1 << 14:
        raise ValueError("dense oracle limited to coarse grids")
    cols = np.empty((n, n))
    unit = np.zeros(n)
    for j in range(n):
        unit[j] = 1.0
        cols[:, j] = op(PlanarField(grid, unit.reshape(grid.points))).values.ravel()
        unit[j] = 0.0
    A = 0.5 * (cols + cols.T)
    if norm == "h1":
        bv = _h1_matvec(grid)
        Bcols = np.empty((n, n))
        for j in range(n):
            unit[j] = 1.0
            Bcols[:, j] = bv(unit)
            unit[j] = 0.0
        Bmat = 0.5 * (Bcols + Bcols.T)
    else:
        Bmat = None
    if ortho:
        V = np.stack([v.values.ravel() for v in ortho], axis=1)
        Z = scipy.linalg.null_space(V.T)
        A = Z.T @ A @ Z
        if Bmat is not None:
            Bmat = Z.T @ Bmat @ Z
    vals = scipy.linalg.eigh(A, Bmat, eigvals_only=True, subset_by_index=[0, 0])
    return float(vals[0])
