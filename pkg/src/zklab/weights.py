"""The 1D weight families used by the weighted norms and virial functionals.

All weights are prescribed piecewise (plateaus, power growth, exponential
tails) with smooth transitions left unspecified; concrete C^3 polynomial
steps fill the transition windows.  zeta carries the normalization
int zeta = 1, which forces a dip below its right-tail values inside the
transition band; the dip is a fixed smooth bump whose amplitude is tuned
at construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline


def smoothstep(t):
    """C^3 polynomial step: 0 for t <= 0, 1 for t >= 1."""
    s = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return s ** 4 * (35.0 - 84.0 * s + 70.0 * s ** 2 - 20.0 * s ** 3)


def theta_weight(y, i: int):
    """vartheta_i: 1/2 left of 1/2, y^(i+6) right of 1, nondecreasing.

    The blend sits on [0.93, 1] where y^(i+6) > 1/2 already holds for all
    three exponents, so the interpolated stretch stays monotone.
    """
    if i not in (0, 1, 2):
        raise ValueError("i must be 0, 1, or 2")
    y = np.asarray(y, dtype=float)
    s = smoothstep((y - 0.93) / 0.07)
    power = np.where(y > 0.0, np.abs(y) ** (i + 6), 0.0)
    return 0.5 * (1.0 - s) + power * s


def _zeta_base(y):
    """Even transition from the plateau 1 to the e^{-2y} tail, before tuning."""
    a = np.abs(np.asarray(y, dtype=float))
    # g interpolates 0 -> y so that exp(-2g) runs from 1 to exp(-2y).
    g = a * smoothstep((a - 0.1) / (1.0 / 6.0 - 0.1))
    return np.exp(-2.0 * g)


def _bump(t):
    """C-infinity bump supported on (-1, 1) with maximum 1."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
    return out


_ZETA_DIP_CENTER = 0.1333333333333333
_ZETA_DIP_HALFWIDTH = 0.03


@lru_cache(maxsize=1)
def _zeta_dip_amplitude() -> float:
    """Amplitude making int zeta = 1; the tails integrate analytically."""
    base_band = quad(lambda y: _zeta_base(y), 0.1, 1.0 / 6.0, epsabs=1e-14)[0]
    bump_band = quad(
        lambda y: _bump((y - _ZETA_DIP_CENTER) / _ZETA_DIP_HALFWIDTH),
        0.1, 1.0 / 6.0, epsabs=1e-14)[0]
    # 1 = plateau (0.2) + tails (e^{-1/3}) + 2 * (base_band - delta * bump_band)
    target_band = 0.5 * (1.0 - 0.2 - np.exp(-1.0 / 3.0))
    delta = (base_band - target_band) / bump_band
    return float(delta)


def zeta_weight(y):
    """Even weight: e^{2y} left tail, 1 on (-1/10, 1/10), e^{-2y} right tail,
    normalized to unit integral."""
    y = np.asarray(y, dtype=float)
    delta = _zeta_dip_amplitude()
    a = np.abs(y)
    out = _zeta_base(y) - delta * _bump((a - _ZETA_DIP_CENTER) / _ZETA_DIP_HALFWIDTH)
    return out


def psi0_weight(y):
    """psi_0: e^{6y} left of -1, 1/2 right of -1/2, nondecreasing."""
    y = np.asarray(y, dtype=float)
    s = smoothstep((y + 1.0) / 0.5)
    return (1.0 - s) * np.exp(6.0 * np.minimum(y, 0.0)) + 0.5 * s


def chi_tilde(y):
    """Even plateau cutoff: 1 for |y| <= 1, 0 for |y| >= 2."""
    return 1.0 - smoothstep(np.abs(np.asarray(y, dtype=float)) - 1.0)


def psi_half_profile(x):
    """psi(x) = (2/pi) arctan(e^{-x}), the mass-monotonicity weight."""
    return (2.0 / np.pi) * np.arctan(np.exp(-np.asarray(x, dtype=float)))


@dataclass
class WeightFamily:
    """All B- and A-scaled weights sampled on one y1 axis."""

    B: float
    A: float
    y1: np.ndarray
    gamma: float = field(init=False)
    psi_B: np.ndarray = field(init=False)
    psi_0B: np.ndarray = field(init=False)
    chi_tilde_B: np.ndarray = field(init=False)
    psi_A: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.B <= 100.0:
            raise ValueError("B must exceed 100")
        if self.A <= 1.0:
            raise ValueError("A must be much larger than 1")
        self.gamma = self.B ** (-3.0)
        self.psi_B = self._integrate_psi_B(self.y1)
        self.psi_0B = psi0_weight(self.y1 / self.B)
        self.chi_tilde_B = self._build_chi_tilde_B(self.y1)
        self.psi_A = psi_half_profile(self.y1 / self.A)

    def theta_iB(self, i: int) -> np.ndarray:
        return theta_weight(self.y1 / self.B ** 10, i)

    def phi_iB(self, i: int) -> np.ndarray:
        return np.sqrt(2.0 * self.psi_B * self.theta_iB(i) ** 2)

    def psi_B_prime(self, y):
        """The prescribed derivative of psi_B (piecewise in y1)."""
        y = np.asarray(y, dtype=float)
        B = self.B
        left = zeta_weight(y / B + 1.0 / 3.0 - 0.5 * B ** (-1.0 / 3.0)) / B
        right = zeta_weight(y / B ** (2.0 / 3.0) + B ** (1.0 / 3.0) / 3.0) / B
        return np.where(y < -B / 3.0, left, right)

    def _integrate_psi_B(self, y1) -> np.ndarray:
        """psi_B(y) = int_{-inf}^{y} psi_B'; exponential left tail summed
        analytically, the rest by fine-grid cumulative quadrature."""
        B = self.B
        shift = 1.0 / 3.0 - 0.5 * B ** (-1.0 / 3.0)
        # Left of y_a the argument of zeta is below -1/6, where zeta = e^{2.}:
        # psi_B = (1/2) exp(2(y/B + shift)).
        y_a = B * (-1.0 / 6.0 - shift)

        def analytic(y):
            return 0.5 * np.exp(2.0 * (np.asarray(y, dtype=float) / B + shift))

        y_max = float(np.max(y1))
        if y_max <= y_a:
            return analytic(y1)
        # Step fine relative to the sharper (right-piece) zeta scale
        # B^{2/3}; the normalization dip needs ~30 nodes per halfwidth.
        n = max(2000, int((y_max - y_a) / (0.001 * B ** (2.0 / 3.0))) + 2)
        ys = np.linspace(y_a, y_max, n)
        vals = self.psi_B_prime(ys)
        # Cumulative integral of the cubic interpolant of psi_B'; its
        # antiderivative reproduces psi_B' exactly at the nodes, so finite
        # difference checks of psi_B against psi_B' close at spline order.
        spline = CubicSpline(ys, vals).antiderivative()
        y1 = np.asarray(y1, dtype=float)
        out = np.where(y1 <= y_a,
                       analytic(np.minimum(y1, y_a)),
                       analytic(y_a) + spline(np.clip(y1, y_a, y_max)))
        return out

    def _build_chi_tilde_B(self, y1) -> np.ndarray:
        """chi_tilde_B per its two-sided definition; the inner integral of
        (2/B) psi_0B is accumulated once on a fine grid through 0."""
        B = self.B
        y1 = np.asarray(y1, dtype=float)
        lo = min(float(np.min(y1)), -4.0 * B) - 1.0
        hi = max(float(np.max(y1)), 0.0) + 1.0
        n = max(4000, int((hi - lo) / (0.02 * B)) + 2)
        ys = np.linspace(lo, hi, n)
        h = ys[1] - ys[0]
        vals = (2.0 / B) * psi0_weight(ys / B)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * h)])
        cum -= np.interp(0.0, ys, cum)  # anchor the integral at 0
        inner = np.interp(y1, ys, cum)
        cut = np.where(y1 <= 0.0, chi_tilde(y1 / (2.0 * B)),
                       chi_tilde(y1 / (10.0 * B ** 10)))
        return cut * inner
