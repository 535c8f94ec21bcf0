"""Weight-family property tests: normalization, monotonicity, tails."""

import numpy as np
import pytest
from scipy.integrate import quad

from zklab.weights import (WeightFamily, chi_tilde, psi0_weight,
                           psi_half_profile, smoothstep, theta_weight,
                           zeta_weight)


def test_smoothstep_is_c3_step():
    assert smoothstep(-1.0) == 0.0
    assert smoothstep(0.0) == 0.0
    assert smoothstep(1.0) == 1.0
    assert smoothstep(2.0) == 1.0
    assert smoothstep(0.5) == pytest.approx(0.5)
    t = np.linspace(0.0, 1.0, 1001)
    assert np.all(np.diff(smoothstep(t)) >= 0.0)
    # derivative vanishes to third order at both ends
    h = 1e-3
    assert smoothstep(h) < h ** 3
    assert 1.0 - smoothstep(1.0 - h) < h ** 3


def test_theta_weight_pieces_and_monotone():
    y = np.linspace(-2.0, 3.0, 5001)
    for i in (0, 1, 2):
        w = theta_weight(y, i)
        assert np.all(w[y <= 0.5] == 0.5)
        right = y >= 1.0
        assert np.max(np.abs(w[right] - y[right] ** (i + 6))) < 1e-12
        assert np.all(np.diff(w) >= -1e-15)
    with pytest.raises(ValueError):
        theta_weight(y, 3)


def test_zeta_normalized_even_positive():
    val, _ = quad(lambda t: float(zeta_weight(t)), -8.0, 8.0, limit=400)
    # the tails beyond |y| = 8 add 2 * e^{-16}/2, below the tolerance
    assert abs(val + np.exp(-16.0) - 1.0) < 1e-10
    y = np.linspace(-1.0, 1.0, 4001)
    z = zeta_weight(y)
    assert np.max(np.abs(z - z[::-1])) < 1e-14
    assert np.all(z > 0.0)
    # plateau and exponential tails are exact
    assert zeta_weight(0.05) == 1.0
    assert zeta_weight(0.5) == pytest.approx(np.exp(-1.0), rel=1e-14)
    assert zeta_weight(-0.5) == pytest.approx(np.exp(-1.0), rel=1e-14)


def test_psi0_pieces():
    assert psi0_weight(-2.0) == pytest.approx(np.exp(-12.0), rel=1e-14)
    assert psi0_weight(-0.25) == 0.5
    assert psi0_weight(3.0) == 0.5
    y = np.linspace(-3.0, 1.0, 4001)
    assert np.all(np.diff(psi0_weight(y)) >= -1e-15)


def test_chi_tilde_pieces():
    y = np.linspace(-3.0, 3.0, 601)
    c = chi_tilde(y)
    assert np.all(c[np.abs(y) <= 1.0] == 1.0)
    assert np.all(c[np.abs(y) >= 2.0] == 0.0)
    assert np.max(np.abs(c - c[::-1])) < 1e-13


def test_psi_half_profile_limits():
    assert psi_half_profile(0.0) == pytest.approx(0.5)
    assert psi_half_profile(-50.0) == pytest.approx(1.0)
    assert psi_half_profile(50.0) == pytest.approx(0.0, abs=1e-20)
    x = np.linspace(-10.0, 10.0, 2001)
    assert np.all(np.diff(psi_half_profile(x)) < 0.0)


@pytest.fixture(scope="module")
def wf():
    y1 = np.linspace(-512.0, 512.0, 8193)
    return WeightFamily(B=128.0, A=64.0, y1=y1)


def test_family_validation():
    y1 = np.linspace(-10.0, 10.0, 11)
    with pytest.raises(ValueError):
        WeightFamily(B=50.0, A=64.0, y1=y1)
    with pytest.raises(ValueError):
        WeightFamily(B=128.0, A=0.5, y1=y1)


def test_psi_B_monotone_and_bounded(wf):
    # the far-right increments fall below double resolution; never negative
    assert np.all(np.diff(wf.psi_B) >= -1e-16)
    mid = np.abs(wf.y1) < 200.0
    assert np.all(np.diff(wf.psi_B[mid]) > 0.0)
    assert wf.psi_B[0] > 0.0
    # psi_B tends to 1/2 on the right (its derivative integrates to 1/2)
    assert 0.49 < wf.psi_B[-1] <= 0.5 + 1e-5


def test_psi_B_matches_prescribed_derivative():
    # central differences of psi_B converge to the prescribed psi_B' at
    # second order; the sharp normalization dip dominates the error
    errs = []
    for n in (8193, 32769):
        y1 = np.linspace(-512.0, 512.0, n)
        fam = WeightFamily(B=128.0, A=64.0, y1=y1)
        grad = np.gradient(fam.psi_B, y1)
        target = fam.psi_B_prime(y1)
        errs.append(np.max(np.abs(grad - target)) / np.max(np.abs(target)))
    assert errs[0] < 5e-2
    assert errs[0] / errs[1] > 8.0


def test_psi_B_left_tail_analytic(wf):
    B = wf.B
    shift = 1.0 / 3.0 - 0.5 * B ** (-1.0 / 3.0)
    y = wf.y1[wf.y1 < -B / 2.0]
    expected = 0.5 * np.exp(2.0 * (y / B + shift))
    got = wf.psi_B[wf.y1 < -B / 2.0]
    assert np.max(np.abs(got - expected) / expected) < 1e-10


def test_theta_iB_is_half_on_practical_grids(wf):
    # y1/B^10 never reaches 1/2 on any realistic box
    for i in (0, 1, 2):
        assert np.all(wf.theta_iB(i) == 0.5)


def test_phi_iB_matches_definition(wf):
    for i in (0, 1, 2):
        expected = np.sqrt(2.0 * wf.psi_B * wf.theta_iB(i) ** 2)
        assert np.array_equal(wf.phi_iB(i), expected)
        assert np.all(np.isfinite(expected))


def test_chi_tilde_B_linear_in_core(wf):
    # psi_0B equals 1/2 for y1 >= -B/2, so the inner integral is y1/B there
    # and the outer cutoffs are still 1
    core = wf.y1 >= -0.45 * wf.B
    dev = np.max(np.abs(wf.chi_tilde_B[core] - wf.y1[core] / wf.B))
    assert dev < 1e-9
    i0 = np.argmin(np.abs(wf.y1))
    assert abs(wf.chi_tilde_B[i0] - wf.y1[i0] / wf.B) < 1e-12


def test_psi_A_second_derivative_bound(wf):
    # |psi_A''| = (1/A)|tanh(y/A)| |psi_A'| <= (2/A)|psi_A'|
    A = wf.A
    x = wf.y1 / A
    dpsi = -(2.0 / np.pi) * (1.0 / A) / (np.exp(x) + np.exp(-x))
    d2 = np.gradient(np.gradient(wf.psi_A, wf.y1), wf.y1)
    interior = slice(10, -10)
    bound = (2.0 / A) * np.abs(dpsi)
    assert np.all(np.abs(d2[interior]) <= bound[interior] + 1e-12)


def test_gamma_definition(wf):
    assert wf.gamma == pytest.approx(wf.B ** (-3.0), rel=1e-15)
