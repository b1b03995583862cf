import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from superhex.greens import (LatticeSumParams, ResonanceError, SingularPointError, direct_sum_oracle, expint,
                             expint_regular, green, green_laplace, green_laplace_regular, green_regular,
                             helmholtz_correction)
from superhex.lattice import build_lattice

B = build_lattice()


def _alpha(a1, a2):
    return np.array([a1, a2]) @ B.dual


@pytest.mark.parametrize("n", [1, 2, 3, 7, 15])
@pytest.mark.parametrize("z", [1e-6, 0.3, 2.0, 11.0])
def test_expint_matches_mpmath(n, z):
    ref = float(mpmath.expint(n, z))
    assert float(expint(n, np.array([z]))[0]) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("n", [1, 2, 4])
@pytest.mark.parametrize("z", [1e-3, 0.5, 3.0])
def test_expint_regular_removes_log(n, z):
    # E_n(z) - (-z)^(n-1) (-log z) / (n-1)! is analytic
    sing = (-z) ** (n - 1) * (-math.log(z)) / math.factorial(n - 1)
    ref = float(mpmath.expint(n, z)) - sing
    assert float(np.real(expint_regular(n, np.array([z]))[0])) == pytest.approx(ref, rel=1e-10, abs=1e-13)


def test_reference_value_laplace():
    v = green_laplace(np.array([0.1, 0.2])).value
    assert float(np.real(v)) == pytest.approx(-0.03113587836227767, abs=1e-13)


@pytest.mark.parametrize("seed", range(4))
def test_against_direct_series(seed):
    r = np.random.default_rng(seed)
    x = r.uniform(-0.45, 0.45, 2)
    alpha = _alpha(*r.uniform(-0.5, 0.5, 2))
    omega = float(r.uniform(0.0, 2.5))
    ref = direct_sum_oracle(x, alpha, omega, 400, B)
    got = green(x, alpha, omega, B, gradient=False).value
    assert abs(got - ref.value) < 1e-4
    assert abs(got - ref.value) < ref.tail_estimate


def test_helmholtz_correction_against_fast_series():
    x = np.array([0.13, -0.21])
    alpha = _alpha(0.2, -0.1)
    ref = direct_sum_oracle(x, alpha, 1.3, 150, B, difference=True)
    got = helmholtz_correction(x, alpha, 1.3, B).value
    assert abs(got - ref.value) < max(5 * ref.tail_estimate, 1e-8)


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.45, 0.45), st.floats(-0.45, 0.45), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5),
       st.floats(0.0, 3.0))
def test_ewald_split_invariance(x1, x2, a1, a2, omega):
    x = np.array([x1, x2])
    if np.linalg.norm(x) < 1e-3:
        return
    alpha = _alpha(a1, a2)
    ks = alpha + B.dual_points(*np.meshgrid(range(-2, 3), range(-2, 3))).reshape(-1, 2)
    if np.min(np.abs(np.linalg.norm(ks, axis=1) - omega)) < 1e-2:
        return
    vals = [green(x, alpha, omega, B, LatticeSumParams(ewald_split=e), gradient=False).value for e in (1.0, 2.5, 4.0, 8.0)]
    assert np.ptp(np.real(vals)) < 1e-10 and np.ptp(np.imag(vals)) < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.4, 0.4), st.floats(-0.4, 0.4), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5),
       st.integers(-2, 2), st.integers(-2, 2))
def test_quasi_periodicity(x1, x2, a1, a2, n1, n2):
    x = np.array([x1, x2])
    if np.linalg.norm(x) < 1e-3:
        return
    alpha = _alpha(a1, a2)
    shift = B.points(n1, n2)
    g0 = green(x, alpha, 0.7, B, gradient=False).value
    g1 = green(x + shift, alpha, 0.7, B, gradient=False).value
    assert abs(g1 - np.exp(1j * alpha @ shift) * g0) < 1e-11


@settings(max_examples=15, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.integers(-2, 2), st.integers(-2, 2))
def test_periodic_in_alpha(a1, a2, m1, m2):
    x = np.array([0.17, 0.05])
    alpha = _alpha(a1, a2)
    if np.linalg.norm(alpha) < 1e-6:
        return
    g0 = green(x, alpha, 0.0, B, gradient=False).value
    g1 = green(x, alpha + B.dual_points(m1, m2), 0.0, B, gradient=False).value
    # G grows like 1/|alpha|^2 near Gamma, so compare relative to its size
    assert abs(g1 - g0) < 1e-11 * max(1.0, abs(g0))


def test_reciprocity():
    # G^{alpha}(-x) = G^{-alpha}(x) and G^{-alpha} = conj(G^{alpha}) for real omega
    x = np.array([0.21, -0.08])
    alpha = _alpha(0.17, 0.31)
    g = green(x, alpha, 1.1, B, gradient=False).value
    assert abs(green(-x, -alpha, 1.1, B, gradient=False).value - g) < 1e-12
    assert abs(green(x, -alpha, 1.1, B, gradient=False).value - np.conj(g)) < 1e-12


@pytest.mark.parametrize("omega", [0.0, 1.7])
def test_gradient_matches_finite_differences(omega):
    x = np.array([0.23, -0.11])
    alpha = _alpha(0.1, 0.3)
    ev = green(x, alpha, omega, B)
    h = 1e-6
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd = (green(x + e, alpha, omega, B, gradient=False).value - green(x - e, alpha, omega, B, gradient=False).value) / (2 * h)
        assert abs(ev.gradient[i] - fd) < 1e-7


@pytest.mark.parametrize("omega", [0.0, 2.0])
def test_helmholtz_equation(omega):
    # Delta G + omega^2 G = 0 away from lattice points
    x = np.array([0.3, 0.12])
    alpha = _alpha(0.13, -0.22)
    h = 1e-3
    g = lambda p: green(p, alpha, omega, B, gradient=False).value  # noqa: E731
    lap = (g(x + [h, 0]) + g(x - [h, 0]) + g(x + [0, h]) + g(x - [0, h]) - 4 * g(x)) / h**2
    assert abs(lap + omega**2 * g(x)) < 1e-4


def test_periodic_laplace_source_is_compensated():
    # at alpha = 0, omega = 0 the zero mode is removed: Delta G = -1/|Y|
    x = np.array([0.3, 0.12])
    h = 1e-3
    g = lambda p: green_laplace(p).value  # noqa: E731
    lap = (g(x + [h, 0]) + g(x - [h, 0]) + g(x + [0, h]) + g(x - [0, h]) - 4 * g(x)) / h**2
    assert float(np.real(lap)) == pytest.approx(-1 / B.cell_area, rel=1e-5)


@pytest.mark.parametrize("omega", [0.0, 1.5])
def test_regular_part_continuous(omega):
    from scipy.special import j0

    alpha = _alpha(0.2, 0.1)
    x = np.array([1e-4, 2e-4])
    r = np.linalg.norm(x)
    full = green(x, alpha, omega, B, gradient=False).value
    reg = green_regular(x, alpha, omega, B, gradient=False).value
    assert abs(full - reg - j0(omega * r) * math.log(r) / (2 * math.pi)) < 1e-12
    at0 = green_regular(np.zeros(2), alpha, omega, B, gradient=False).value
    assert abs(reg - at0) < 1e-3
    np.testing.assert_allclose(green_laplace_regular(np.zeros(2)).value, green_regular(np.zeros(2)).value)


def test_singular_point_and_resonance_errors():
    with pytest.raises(SingularPointError):
        green(np.zeros(2), (0.0, 0.0), 1.0)
    with pytest.raises(SingularPointError):
        green(B.l1, (0.0, 0.0), 1.0)
    alpha = _alpha(0.2, 0.0)
    with pytest.raises(ResonanceError):
        green(np.array([0.1, 0.1]), alpha, float(np.linalg.norm(alpha)))


def test_regular_domain_checked():
    with pytest.raises(ValueError):
        green_regular(np.array([0.6, 0.0]))


def test_invalid_params():
    with pytest.raises(ValueError):
        LatticeSumParams(ewald_split=0.0)
    with pytest.raises(ValueError):
        helmholtz_correction(np.array([0.1, 0.1]), (0.0, 0.0), 0.0)
