"""Transverse profile F, constant theta, nonlocal profile P, and the
localized family Q_b with its generation error Psi_b.

P solves L P = G where G is the y1-antiderivative of Lam Q vanishing at
y1 = +infinity.  G tends to -F(y2) on the far left, which clashes with the
periodic box; a smooth bridge supported against the left edge restores
periodicity, and every downstream quadrature pairs P with exponentially
localized fields so the bridge region never contributes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .grid import (PlanarField, PlanarGrid, antiderivative_x1, inner_product,
                   laplacian, norm_l2, spectral_derivative, scaling_generator)
from .operators import OperatorAssembly
from .solvers import solve_symmetric


@dataclass
class TransverseProfile:
    """Line-integral profile F(y2) with its unitary Fourier transform."""

    y2: np.ndarray
    F: np.ndarray
    xi: np.ndarray = field(init=False)
    Fhat: np.ndarray = field(init=False)

    def __post_init__(self):
        n = self.y2.size
        L = n * (self.y2[1] - self.y2[0])
        h = L / n
        self.xi = 2.0 * np.pi * np.fft.fftfreq(n, d=h)
        # Continuum transform with 1/sqrt(2*pi) prefactor; the phase factor
        # accounts for the grid starting at -L/2 rather than 0.
        phase = np.exp(1j * self.xi * (L / 2.0))
        self.Fhat = (h / np.sqrt(2.0 * np.pi)) * phase * np.fft.fft(self.F)

    def spectral_mass(self) -> float:
        dxi = self.xi[1] - self.xi[0]
        return float(np.sum(np.abs(self.Fhat) ** 2) * dxi)

    def weighted_spectral_mass(self) -> float:
        dxi = self.xi[1] - self.xi[0]
        return float(np.sum(np.abs(self.Fhat) ** 2 / (1.0 + self.xi ** 2)) * dxi)


def compute_F(asm: OperatorAssembly) -> TransverseProfile:
    """F(y2) = integral over y1 of (Lam Q)(y1, y2)."""
    h1 = asm.grid.spacing[0]
    F = asm.LamQ.values.sum(axis=0) * h1
    return TransverseProfile(y2=asm.grid.x2.copy(), F=F)


def compute_theta(tp: TransverseProfile) -> float:
    """theta = 2 * int |Fhat|^2/(1+xi^2) / int |Fhat|^2."""
    return 2.0 * tp.weighted_spectral_mass() / tp.spectral_mass()


def left_asymptote(tp: TransverseProfile) -> np.ndarray:
    """p(y2) = -(1 - d2^2)^{-1} F, the limit of P as y1 -> -infinity."""
    n = tp.y2.size
    h = tp.y2[1] - tp.y2[0]
    xi = 2.0 * np.pi * np.fft.fftfreq(n, d=h)
    return -np.fft.ifft(np.fft.fft(tp.F) / (1.0 + xi ** 2)).real


def _bridge(grid: PlanarGrid, offset: float, width: float) -> np.ndarray:
    """C-infinity step in y1: 1 at the left edge, 0 past the transition."""
    y1 = grid.x1
    c = -grid.box_lengths[0] / 2.0 + offset
    return 0.5 * (1.0 - np.tanh((y1 - c) / width))


@dataclass
class NonlocalProfile:
    """P together with the data needed to judge where it is trustworthy."""

    P: PlanarField
    G: PlanarField
    bridge_offset: float
    residual: float


def compute_P(asm: OperatorAssembly, tol: float = 1e-8,
              bridge_offset: float = 12.0, bridge_width: float = 1.2,
              maxiter: int = 4000) -> NonlocalProfile:
    """Solve L P = G with G the antiderivative of Lam Q vanishing on the right.

    The rhs is made periodic by adding F(y2) * sigma(y1) with sigma a smooth
    step against the left edge; P is returned orthogonal to grad Q.  The
    reported residual is || d1(L P) - Lam Q || / || Lam Q || on the interior
    (left strip of width 2 * bridge_offset excluded).
    """
    grid = asm.grid
    tp = compute_F(asm)
    G = antiderivative_x1(asm.LamQ)
    sigma = _bridge(grid, bridge_offset, bridge_width)
    G_tilde = PlanarField(grid, G.values + sigma[:, None] * tp.F[None, :])
    P = solve_symmetric(asm.operator_L(), G_tilde, ortho=[asm.d1Q, asm.d2Q],
                        tol=tol, maxiter=maxiter)
    LP = asm.apply_L(P)
    mismatch = spectral_derivative(LP, 1).values - asm.LamQ.values
    interior = grid.x1 > -grid.box_lengths[0] / 2.0 + 2.0 * bridge_offset
    num = np.sqrt(np.sum(mismatch[interior, :] ** 2) * grid.cell_area)
    residual = num / norm_l2(asm.LamQ)
    return NonlocalProfile(P=P, G=G_tilde, bridge_offset=bridge_offset,
                           residual=residual)


def smoothstep(t: np.ndarray) -> np.ndarray:
    """C^3 polynomial step: 0 for t <= 0, 1 for t >= 1."""
    s = np.clip(t, 0.0, 1.0)
    return s ** 4 * (35.0 - 84.0 * s + 70.0 * s ** 2 - 20.0 * s ** 3)


def cutoff_chi(t: np.ndarray) -> np.ndarray:
    """Nondecreasing cutoff, 0 on (-inf, -2], 1 on [-1, inf)."""
    return smoothstep(np.asarray(t, dtype=float) + 2.0)


class BoxTooSmallError(ValueError):
    """The localization plateau does not fit inside the periodic box."""


@dataclass
class LocalizedProfile:
    """Q_b = Q + b * chi_b(y1) * P on a shared grid."""

    b: float
    Qb: PlanarField
    chi1d: np.ndarray
    Q: PlanarField
    P: PlanarField


def _cutoff_scale(grid: PlanarGrid, b: float, margin: float,
                  clamp: bool) -> tuple[float, str]:
    """Cutoff scale for chi(scale * y1) and which regime applies.

    Modes: "std" (the prescribed |b|^{3/4} transition fits with `margin` to
    spare), "ones" (the transition lies wholly left of the box, chi == 1),
    "clamped" (the scale is floored so the transition just fits; used by
    Newton iterations that must move continuously through small |b|).
    """
    half = grid.box_lengths[0] / 2.0
    scale = abs(b) ** 0.75
    if 2.0 / scale + margin <= half:
        return scale, "std"
    if not clamp:
        if 1.0 / scale >= half:
            # The cutoff transition lies entirely left of the box.
            return scale, "ones"
        raise BoxTooSmallError(
            f"plateau reaches y1 = -{2.0 / scale:.1f} but the box ends at "
            f"-{half:.1f}; enlarge the first box length to at least "
            f"{2.0 * (2.0 / scale + margin):.0f}")
    if half <= margin:
        raise BoxTooSmallError("box smaller than the cutoff margin")
    return 2.0 / (half - margin), "clamped"


def build_Qb(asm: OperatorAssembly, P: PlanarField, b: float,
             margin: float = 8.0, clamp: bool = False) -> LocalizedProfile:
    """Assemble Q_b = Q + b * chi(|b|^{3/4} y1) * P.

    The cutoff starts rising at y1 = -2 |b|^{-3/4}; the box must reach
    `margin` beyond that point on the left.  With clamp=True the cutoff
    scale is floored at the largest transition the box can hold, which
    keeps Q_b continuous in b on boxes too small for intermediate |b|.
    """
    if abs(b) > 0.1:
        raise ValueError("|b| must not exceed 0.1")
    grid = asm.grid
    if b == 0.0:
        chi1d = np.ones(grid.points[0])
        return LocalizedProfile(b=0.0, Qb=asm.Q, chi1d=chi1d, Q=asm.Q, P=P)
    scale, mode = _cutoff_scale(grid, b, margin, clamp)
    if mode == "ones":
        chi1d = np.ones(grid.points[0])
    else:
        chi1d = cutoff_chi(scale * grid.x1)
    vals = asm.Q.values + b * chi1d[:, None] * P.values
    return LocalizedProfile(b=b, Qb=PlanarField(grid, vals), chi1d=chi1d,
                            Q=asm.Q, P=P)


def compute_Psi_b(lp: LocalizedProfile) -> PlanarField:
    """Psi_b = d1(-Delta Q_b + Q_b - Q_b^3) - b * Lam Q_b."""
    Qb = lp.Qb
    elliptic = PlanarField(Qb.grid, -laplacian(Qb).values + Qb.values - Qb.values ** 3)
    out = spectral_derivative(elliptic, 1).values - lp.b * scaling_generator(Qb).values
    return PlanarField(Qb.grid, out)


def fit_power_law(b_values, lhs_values) -> tuple[float, float]:
    """Least-squares fit |lhs| ~ C |b|^p; returns (p, C)."""
    b = np.abs(np.asarray(b_values, dtype=float))
    y = np.abs(np.asarray(lhs_values, dtype=float))
    if np.any(y == 0.0):
        raise ValueError("remainder vanished exactly; nothing to fit")
    p, logc = np.polyfit(np.log(b), np.log(y), 1)
    return float(p), float(np.exp(logc))


def sweep_to_json(b_values, lhs_values, exponent: float, constant: float) -> str:
    return json.dumps({
        "b_values": list(map(float, b_values)),
        "lhs_values": list(map(float, lhs_values)),
        "fitted_exponent": exponent,
        "fitted_constant": constant,
    }, indent=2)


def default_sweep_b(n: int = 5, lo: float = 0.01, hi: float = 0.1) -> np.ndarray:
    """Both-sign geometric b sweep spanning [lo, hi]."""
    mags = np.geomspace(lo, hi, n)
    return np.concatenate([mags, -mags])
