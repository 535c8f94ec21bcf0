"""Periodic planar grids, fields, and spectral primitives.

All fields live on a rectangular periodic box sampled on an even N1 x N2
lattice.  Differentiation and quadrature are spectral: the trapezoid rule
on a periodic grid integrates the trigonometric interpolant exactly, so
inner products of resolved fields are accurate to rounding.
"""

from __future__ import annotations

import io
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"ZKFIELD1"


class GridMismatchError(ValueError):
    """Raised when an operation mixes fields on different grids."""


@dataclass(frozen=True)
class PlanarGrid:
    """Even periodic lattice on the centered box [-L1/2, L1/2) x [-L2/2, L2/2)."""

    box_lengths: tuple[float, float]
    points: tuple[int, int]

    def __post_init__(self):
        L1, L2 = self.box_lengths
        N1, N2 = self.points
        if L1 <= 0 or L2 <= 0:
            raise ValueError("box lengths must be positive")
        if N1 <= 0 or N2 <= 0 or N1 % 2 or N2 % 2:
            raise ValueError("point counts must be even positive integers")

    @property
    def spacing(self) -> tuple[float, float]:
        return (self.box_lengths[0] / self.points[0],
                self.box_lengths[1] / self.points[1])

    def axis_coords(self, axis: int) -> np.ndarray:
        L = self.box_lengths[axis - 1]
        N = self.points[axis - 1]
        return -L / 2 + (L / N) * np.arange(N)

    @property
    def x1(self) -> np.ndarray:
        return self.axis_coords(1)

    @property
    def x2(self) -> np.ndarray:
        return self.axis_coords(2)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    def wavenumbers(self, axis: int) -> np.ndarray:
        """Symmetric integer lattice scaled by 2*pi/L, Nyquist included."""
        L = self.box_lengths[axis - 1]
        N = self.points[axis - 1]
        return 2.0 * np.pi * np.fft.fftfreq(N, d=1.0 / N) / L

    def kmesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.wavenumbers(1), self.wavenumbers(2), indexing="ij")

    @property
    def cell_area(self) -> float:
        h1, h2 = self.spacing
        return h1 * h2

    def compatible(self, other: "PlanarGrid") -> bool:
        return (self.points == other.points
                and np.allclose(self.box_lengths, other.box_lengths))


@dataclass
class PlanarField:
    """Real field sampled on a PlanarGrid, with lazily cached spectrum."""

    grid: PlanarGrid
    values: np.ndarray
    _spectrum: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.points:
            raise ValueError(f"values shape {vals.shape} != grid points {self.grid.points}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def spectrum(self) -> np.ndarray:
        if self._spectrum is None:
            self._spectrum = np.fft.fft2(self.values)
        return self._spectrum

    def copy_with(self, values: np.ndarray) -> "PlanarField":
        return PlanarField(self.grid, values)

    def __add__(self, other):
        _check_same_grid(self, other)
        return PlanarField(self.grid, self.values + other.values)

    def __sub__(self, other):
        _check_same_grid(self, other)
        return PlanarField(self.grid, self.values - other.values)

    def __mul__(self, scalar: float):
        return PlanarField(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return PlanarField(self.grid, -self.values)


def _check_same_grid(f: PlanarField, g: PlanarField):
    if not f.grid.compatible(g.grid):
        raise GridMismatchError("fields live on different grids")


def zeros(grid: PlanarGrid) -> PlanarField:
    return PlanarField(grid, np.zeros(grid.points))


def from_values(grid: PlanarGrid, values: np.ndarray) -> PlanarField:
    return PlanarField(grid, values)


def inner_product(f: PlanarField, g: PlanarField) -> float:
    """Periodic trapezoid (= spectral) quadrature of f*g over the box."""
    _check_same_grid(f, g)
    return float(np.sum(f.values * g.values) * f.grid.cell_area)


def norm_l2(f: PlanarField) -> float:
    return float(np.sqrt(max(inner_product(f, f), 0.0)))


def norm_h1(f: PlanarField) -> float:
    g1 = spectral_derivative(f, 1)
    g2 = spectral_derivative(f, 2)
    return float(np.sqrt(max(inner_product(f, f) + inner_product(g1, g1)
                             + inner_product(g2, g2), 0.0)))


def _resolution_check(f: PlanarField):
    spec = np.abs(f.spectrum) ** 2
    total = spec.sum()
    if total == 0.0:
        return
    N1, N2 = f.grid.points
    n1 = np.abs(np.fft.fftfreq(N1, d=1.0 / N1))
    n2 = np.abs(np.fft.fftfreq(N2, d=1.0 / N2))
    top = (n1[:, None] > N1 / 3) | (n2[None, :] > N2 / 3)
    frac = spec[top].sum() / total
    if frac > 1e-8:
        warnings.warn(
            f"field marginally resolved: top third of spectrum holds {frac:.2e} of energy",
            RuntimeWarning, stacklevel=3)


def spectral_derivative(f: PlanarField, axis: int, order: int = 1,
                        check_resolved: bool = False) -> PlanarField:
    """Exact derivative of the trigonometric interpolant along axis 1 or 2."""
    if axis not in (1, 2):
        raise ValueError("axis must be 1 or 2")
    if order < 1:
        raise ValueError("order must be a positive integer")
    if check_resolved:
        _resolution_check(f)
    k = f.grid.wavenumbers(axis)
    if order % 2 == 1:
        # Nyquist mode has no well-defined odd derivative on a real grid.
        k = k.copy()
        k[f.grid.points[axis - 1] // 2] = 0.0
    sym = (1j * k) ** order
    shape = (-1, 1) if axis == 1 else (1, -1)
    out = np.fft.ifft2(f.spectrum * sym.reshape(shape)).real
    return PlanarField(f.grid, out)


def laplacian(f: PlanarField) -> PlanarField:
    K1, K2 = f.grid.kmesh()
    out = np.fft.ifft2(f.spectrum * (-(K1 ** 2) - K2 ** 2)).real
    return PlanarField(f.grid, out)


def gradient(f: PlanarField) -> tuple[PlanarField, PlanarField]:
    return spectral_derivative(f, 1), spectral_derivative(f, 2)


def scaling_generator(f: PlanarField) -> PlanarField:
    """L2-critical scaling generator: f + y . grad(f)."""
    X1, X2 = f.grid.mesh()
    g1, g2 = gradient(f)
    return PlanarField(f.grid, f.values + X1 * g1.values + X2 * g2.values)


def antiderivative_x1(f: PlanarField) -> PlanarField:
    """Spectral cumulative integral along y1 vanishing at the right edge.

    Returns G with dG/dy1 = f and G = 0 at y1 = L1/2 (the periodic seam),
    i.e. G(y1) = -int_{y1}^{L1/2} f.  The nonzero row mean of f produces a
    linear-in-y1 term handled analytically.
    """
    grid = f.grid
    L1 = grid.box_lengths[0]
    N1 = grid.points[0]
    spec = f.spectrum.copy()
    # spec[0, :] is the y2-transform of the per-y2 row sums along y1.
    mean_rows = np.fft.ifft(spec[0, :]).real / N1
    spec[0, :] = 0.0
    k1 = grid.wavenumbers(1).copy()
    k1[N1 // 2] = 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(k1 == 0.0, 0.0, 1.0 / (1j * np.where(k1 == 0.0, 1.0, k1)))
    osc = np.fft.ifft2(spec * inv[:, None]).real  # zero-mean antiderivative
    # Value of the oscillatory antiderivative at the right edge y1 = L1/2,
    # which equals its value at the left sample by periodicity.
    osc_edge = osc[0, :]  # left edge sample = wrap of right edge
    x1 = grid.x1
    lin = mean_rows[None, :] * (x1[:, None] - L1 / 2)
    out = osc - osc_edge[None, :] + lin
    return PlanarField(grid, out)


# ---------------------------------------------------------------------------
# Serialization: 32-byte header (magic, N1, N2, L1, L2) + row-major f64 LE.

def field_to_bytes(f: PlanarField) -> bytes:
    N1, N2 = f.grid.points
    L1, L2 = f.grid.box_lengths
    header = MAGIC + struct.pack("<IIdd", N1, N2, L1, L2)
    assert len(header) == 32
    return header + f.values.astype("<f8").tobytes(order="C")


def field_from_bytes(buf: bytes) -> PlanarField:
    if buf[:8] != MAGIC:
        raise ValueError("bad magic in field container")
    N1, N2, L1, L2 = struct.unpack("<IIdd", buf[8:32])
    vals = np.frombuffer(buf[32:], dtype="<f8").reshape(N1, N2)
    return PlanarField(PlanarGrid((L1, L2), (N1, N2)), vals.copy())


def save_field(path, f: PlanarField):
    with open(path, "wb") as fh:
        fh.write(field_to_bytes(f))


def load_field(path) -> PlanarField:
    with open(path, "rb") as fh:
        return field_from_bytes(fh.read())


def field_to_csv(f: PlanarField, max_points: int = 256) -> str:
    N1, N2 = f.grid.points
    if N1 > max_points or N2 > max_points:
        raise ValueError("CSV export is limited to small grids")
    x1, x2 = f.grid.x1, f.grid.x2
    buf = io.StringIO()
    buf.write("x1,x2,value\n")
    for i in range(N1):
        for j in range(N2):
            buf.write(f"{float(x1[i])!r},{float(x2[j])!r},"
                      f"{float(f.values[i, j])!r}\n")
    return buf.getvalue()
