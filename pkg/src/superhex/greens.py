"""Quasi-periodic lattice Green's functions by Ewald summation.

``G^{alpha,omega}(x) = (1/|Y|) sum_q exp(i(alpha+q).x) / (omega^2 - |alpha+q|^2)``

with the zero-frequency term dropped when ``omega = 0`` and ``alpha + q = 0``
(the periodic Laplace Green's function).  ``G`` solves
``(Delta + omega^2) G = sum_n exp(i alpha.n) delta(x - n)`` (minus ``1/|Y|`` in the
periodic Laplace case), so ``G ~ (1/2pi) log|x|`` at the origin.

The Ewald split at screening ``eta`` writes ``G`` as

* a spectral sum ``(1/|Y|) sum_k exp(ik.x) exp((w^2-|k|^2)/4eta^2) / (w^2-|k|^2)``;
* a spatial image sum ``-(1/4pi) sum_n exp(i alpha.n) sum_j (w^2/4eta^2)^j / j! E_{j+1}(eta^2 |x-n|^2)``;

both converging like Gaussians.  The ``n = 0`` image carries the logarithm,
``-(1/4pi) sum_j ... E_{j+1}`` has log part ``(1/2pi) J0(w|x|) log|x|``, which is
removed analytically for the regular part used by the Nystrom quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import expn, j0, j1

from .lattice import LatticeBasis, build_lattice

EULER_GAMMA = 0.5772156649015329
SINGULAR_TOL = 1e-12
RESONANCE_TOL = 1e-12
# series for the regular part of E_n is used below this argument
_SERIES_ZMAX = 4.0
_SERIES_TERMS = 64


class SingularPointError(ValueError):
    pass


class ResonanceError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class LatticeSumParams:
    """Ewald controls.

    ``spectral_cutoff`` and ``spatial_cutoff`` are minimum ring counts (radii in
    units of the shortest basis vector); the radii actually used grow until the
    discarded terms are below ``abs_tol / 10``.
    """

    ewald_split: float = 4.0
    spectral_cutoff: int = 1
    spatial_cutoff: int = 1
    abs_tol: float = 1e-15
    max_terms: int = 200_000

    def __post_init__(self):
        if self.ewald_split <= 0:
            raise ValueError("ewald_split must be positive")
        if self.spectral_cutoff < 1 or self.spatial_cutoff < 1:
            raise ValueError("cutoffs must be >= 1")
        if self.abs_tol <= 0:
            raise ValueError("abs_tol must be positive")


DEFAULT_PARAMS = LatticeSumParams()


@dataclass
class GreensEval:
    value: np.ndarray
    gradient: np.ndarray


# ---------------------------------------------------------------------------
# exponential integrals


def expint(n: int, z):
    """``E_n(z)`` for integer ``n >= 0`` and ``z >= 0`` (``E_n(0) = 1/(n-1)``)."""
    z = np.asarray(z, dtype=float)
    if n >= 2:
        out = np.where(z == 0, 1.0 / (n - 1), 0.0)
        nz = z > 0
        out[nz] = expn(n, z[nz])
        return out
    return expn(n, z)


@lru_cache(maxsize=None)
def _reg_coeffs(n: int) -> np.ndarray:
    """Taylor coefficients of ``E_n(z) + (-z)^{n-1} log z / (n-1)!``."""
    j = n - 1
    c = np.empty(_SERIES_TERMS)
    for m in range(_SERIES_TERMS):
        if m == j:
            psi = -EULER_GAMMA + sum(1.0 / i for i in range(1, n))
            c[m] = (-1.0) ** j / math.factorial(j) * psi
        else:
            c[m] = -((-1.0) ** m) / ((m - j) * math.factorial(m))
    return c


def expint_regular(n: int, z):
    """Entire part of ``E_n``: ``E_n(z) + (-z)^{n-1} log(z) / (n-1)!``."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = z <= _SERIES_ZMAX
    if np.any(small):
        out[small] = np.polynomial.polynomial.polyval(z[small], _reg_coeffs(n))
    big = ~small
    if np.any(big):
        zb = z[big]
        out[big] = expn(n, zb) + (-zb) ** (n - 1) * np.log(zb) / math.factorial(n - 1)
    return out


def expint_regular_deriv(n: int, z):
    """``d/dz`` of :func:`expint_regular`."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = z <= _SERIES_ZMAX
    if np.any(small):
        c = _reg_coeffs(n)
        dc = c[1:] * np.arange(1, len(c))
        out[small] = np.polynomial.polynomial.polyval(z[small], dc)
    big = ~small
    if np.any(big):
        zb = z[big]
        j = n - 1
        e_prev = np.exp(-zb) / zb if n == 1 else expn(n - 1, zb)
        log_part = (-1.0) ** j * (j * zb ** (j - 1) * np.log(zb) + zb ** (j - 1)) / math.factorial(j) if j > 0 else 1.0 / zb
        out[big] = -e_prev + log_part
    return out


# ---------------------------------------------------------------------------
# term selection


def helmholtz_order(omega: float, eta: float) -> int:
    """Number of terms in the ``omega^2`` expansion of the spatial Ewald part."""
    c = omega**2 / (4 * eta**2)
    if c == 0:
        return 1
    term, j = 1.0, 0
    while term > 1e-18 or j < 2:
        j += 1
        term *= c / j
        if j > 200:
            raise ConvergenceError("spatial Ewald expansion does not converge; increase ewald_split")
    return j + 1


def _ring_radius(basis_vecs: np.ndarray) -> float:
    return float(min(np.linalg.norm(basis_vecs[0]), np.linalg.norm(basis_vecs[1])))


def _lattice_disk(vecs: np.ndarray, radius: float, center=None) -> np.ndarray:
    """Integer combinations of ``vecs`` within ``radius`` of ``center``."""
    center = np.zeros(2) if center is None else np.asarray(center, dtype=float)
    inv = np.linalg.inv(vecs)
    # bounding box in fractional coordinates
    f0 = center @ inv
    span = radius * np.linalg.norm(inv, axis=1) + 1
    n1 = np.arange(math.floor(f0[0] - span[0]), math.ceil(f0[0] + span[0]) + 1)
    n2 = np.arange(math.floor(f0[1] - span[1]), math.ceil(f0[1] + span[1]) + 1)
    a, b = np.meshgrid(n1, n2, indexing="ij")
    pts = a.ravel()[:, None] * vecs[0] + b.ravel()[:, None] * vecs[1]
    keep = np.linalg.norm(pts - center, axis=1) <= radius
    return pts[keep]


def spectral_vectors(basis: LatticeBasis, alpha, omega: float, params: LatticeSumParams = DEFAULT_PARAMS):
    """Shifted dual vectors ``k = alpha + q`` kept by the spectral cutoff.

    Returns ``(k, coef, const)`` where ``coef`` are the spectral weights and
    ``const`` is the constant left by a dropped ``k = 0`` term (periodic case).
    """
    eta = params.ewald_split
    alpha = np.asarray(alpha, dtype=float)
    log_tol = math.log(10.0 / params.abs_tol)
    kmax2 = omega**2 + 4 * eta**2 * (log_tol + 5.0)
    kmax = max(math.sqrt(kmax2), params.spectral_cutoff * _ring_radius(basis.dual))
    q = _lattice_disk(basis.dual, kmax + np.linalg.norm(alpha), -alpha)
    if len(q) > params.max_terms:
        raise ConvergenceError(f"spectral sum needs {len(q)} terms (> max_terms)")
    k = alpha + q
    k2 = np.einsum("ij,ij->i", k, k)
    keep = k2 <= kmax**2
    k, k2 = k[keep], k2[keep]
    den = omega**2 - k2
    const = 0.0
    if omega == 0:
        zero = k2 < 1e-24
        if np.any(zero):
            k, k2, den = k[~zero], k2[~zero], den[~zero]
            const = 1.0 / (4 * eta**2 * basis.cell_area)
    if np.any(np.abs(den) < RESONANCE_TOL):
        raise ResonanceError(f"omega = {omega} hits the empty-lattice resonance |alpha + q| = omega")
    coef = np.exp(den / (4 * eta**2)) / (den * basis.cell_area)
    return k, coef, const


def image_vectors(basis: LatticeBasis, omega: float, reach: float, params: LatticeSumParams = DEFAULT_PARAMS) -> np.ndarray:
    """Lattice images needed for displacements with ``|x| <= reach``."""
    eta = params.ewald_split
    c = omega**2 / (4 * eta**2)
    zcut = c + math.log(10.0 / params.abs_tol) + 5.0
    rcut = max(math.sqrt(zcut) / eta, params.spatial_cutoff * _ring_radius(basis.direct))
    n = _lattice_disk(basis.direct, rcut + reach)
    if len(n) > params.max_terms:
        raise ConvergenceError(f"spatial sum needs {len(n)} images (> max_terms)")
    # origin first so the log-carrying image is easy to single out
    order = np.argsort(np.einsum("ij,ij->i", n, n), kind="stable")
    return n[order]


# ---------------------------------------------------------------------------
# pointwise evaluation


def _spatial_terms(d, omega, eta, J, gradient, regular):
    """Screened image contribution for displacement(s) ``d`` of one image."""
    r2 = np.einsum("...i,...i->...", d, d)
    z = eta**2 * r2
    c = omega**2 / (4 * eta**2)
    val = np.zeros(r2.shape)
    dz = np.zeros(r2.shape)
    fac = 1.0
    for j in range(J):
        if j:
            fac *= c / j
        if regular:
            val += fac * expint_regular(j + 1, z)
            if gradient:
                dz += fac * expint_regular_deriv(j + 1, z)
        else:
            val += fac * expint(j + 1, z)
            if gradient:
                # d/dz E_{j+1} = -E_j, E_0(z) = exp(-z)/z
                dz -= fac * (np.exp(-z) / z if j == 0 else expint(j, z))
    val = -val / (4 * np.pi)
    grad = None
    if gradient:
        grad = (-dz / (4 * np.pi) * 2 * eta**2)[..., None] * d
    return val, grad


def _evaluate(x, alpha, omega, basis, params, gradient=True, regular=False):
    x = np.asarray(x, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    shape = x.shape[:-1]
    xf = x.reshape(-1, 2)
    eta = params.ewald_split
    k, coef, const = spectral_vectors(basis, alpha, omega, params)
    ph = np.exp(1j * xf @ k.T)
    value = ph @ coef + const
    grad = (ph * coef) @ (1j * k) if gradient else None

    reach = float(np.max(np.linalg.norm(xf, axis=1))) if len(xf) else 0.0
    images = image_vectors(basis, omega, reach, params)
    J = helmholtz_order(omega, eta)
    for n in images:
        d = xf - n
        is_origin = not np.any(n)
        if not regular and np.any(np.einsum("ij,ij->i", d, d) < SINGULAR_TOL**2):
            raise SingularPointError("evaluation point coincides with a lattice point")
        v, g = _spatial_terms(d, omega, eta, J, gradient, regular and is_origin)
        phase = np.exp(1j * (n @ alpha))
        value = value + phase * v
        if gradient:
            grad = grad + phase * g
    if regular:
        r = np.linalg.norm(xf, axis=1)
        lg = math.log(eta**2) / (4 * np.pi)
        value = value + lg * j0(omega * r)
        if gradient and omega != 0:
            with np.errstate(invalid="ignore", divide="ignore"):
                rad = np.where(r > 0, -omega * j1(omega * r) / np.where(r > 0, r, 1.0), -(omega**2) / 2)
            grad = grad + (lg * rad)[:, None] * xf
    value = value.reshape(shape)
    if gradient:
        grad = grad.reshape(shape + (2,))
    return value, grad


def green(x, alpha=(0.0, 0.0), omega: float = 0.0, basis: LatticeBasis | None = None,
          params: LatticeSumParams = DEFAULT_PARAMS, gradient: bool = True) -> GreensEval:
    """``G^{alpha,omega}(x)`` and its gradient for an array of points ``x[..., 2]``."""
    basis = basis or build_lattice()
    v, g = _evaluate(x, alpha, omega, basis, params, gradient, regular=False)
    return GreensEval(v, g)


def green_laplace(x, alpha=(0.0, 0.0), basis: LatticeBasis | None = None,
                  params: LatticeSumParams = DEFAULT_PARAMS) -> GreensEval:
    """Quasi-periodic Laplace Green's function ``G^{alpha,0}``."""
    return green(x, alpha, 0.0, basis, params)


def green_regular(x, alpha=(0.0, 0.0), omega: float = 0.0, basis: LatticeBasis | None = None,
                  params: LatticeSumParams = DEFAULT_PARAMS, gradient: bool = True,
                  check_domain: bool = True) -> GreensEval:
    """``G^{alpha,omega}(x) - (1/2pi) J0(omega|x|) log|x|``, smooth for ``|x| < 1/2``.

    For ``omega = 0`` this is the remainder after removing the free-space
    Laplace kernel; at ``x = 0`` the continuous extension is returned.
    """
    basis = basis or build_lattice()
    xa = np.asarray(x, dtype=float)
    if check_domain and np.any(np.linalg.norm(xa, axis=-1) >= 0.5 * _ring_radius(basis.direct)):
        raise ValueError("regular part is only provided for |x| < half the lattice spacing")
    v, g = _evaluate(xa, alpha, omega, basis, params, gradient, regular=True)
    return GreensEval(v, g)


def green_laplace_regular(x, alpha=(0.0, 0.0), basis: LatticeBasis | None = None,
                          params: LatticeSumParams = DEFAULT_PARAMS) -> GreensEval:
    return green_regular(x, alpha, 0.0, basis, params)


def helmholtz_correction(x, alpha, omega: float, basis: LatticeBasis | None = None,
                         params: LatticeSumParams = DEFAULT_PARAMS) -> GreensEval:
    """``G^{alpha,omega}(x) - G^{alpha,0}(x)``.

    Both terms come from the Ewald split; their difference equals the
    absolutely convergent series ``sum w^2 e^{ik.x} / ((w^2-|k|^2)|k|^2) / |Y|``
    plus ``e^{i alpha.x} / (|Y| (w^2-|alpha|^2))`` for any ``k = 0`` term
    present in ``G^{alpha,omega}`` but absent from ``G^{alpha,0}``.
    """
    if omega == 0:
        raise ValueError("helmholtz_correction needs omega != 0")
    basis = basis or build_lattice()
    full = green(x, alpha, omega, basis, params)
    lap = green(x, alpha, 0.0, basis, params)
    return GreensEval(full.value - lap.value, full.gradient - lap.gradient)


# ---------------------------------------------------------------------------
# literal series, for validation only


@dataclass
class DirectSum:
    value: complex
    tail_estimate: float
    terms: int


def direct_sum_oracle(x, alpha=(0.0, 0.0), omega: float = 0.0, shell_count: int = 100,
                      basis: LatticeBasis | None = None, difference: bool = False) -> DirectSum:
    """Truncated spectral series of ``G^{alpha,omega}(x)``, summed shell by shell.

    Shell ``m`` holds the dual vectors with ``(m-1) s < |alpha+q| <= m s``
    (``s`` the dual spacing).  The returned value averages the partial sums
    over the outer half of the shells and ``tail_estimate`` is the spread of
    those partial sums.  With ``difference=True`` the series of
    ``G^{alpha,omega} - G^{alpha,0}`` is summed instead; its terms decay like
    ``|q|^-4`` and the plain partial sum plus an integral tail bound is used.
    """
    basis = basis or build_lattice()
    x = np.asarray(x, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    s = _ring_radius(basis.dual)
    q = _lattice_disk(basis.dual, shell_count * s + np.linalg.norm(alpha), -alpha)
    k = alpha + q
    k2 = np.einsum("ij,ij->i", k, k)
    keep = k2 <= (shell_count * s) ** 2
    k, k2 = k[keep], k2[keep]
    zero = k2 < 1e-24
    den = omega**2 - k2
    if np.any(np.abs(den[~zero]) < RESONANCE_TOL) or (omega != 0 and np.any(np.abs(den) < RESONANCE_TOL)):
        raise ResonanceError("resonant term in direct sum")
    ph = np.exp(1j * k @ x)
    if difference:
        terms = np.zeros(len(k), dtype=complex)
        nz = ~zero
        terms[nz] = omega**2 * ph[nz] / (den[nz] * k2[nz])
        if np.any(zero):
            terms[zero] = ph[zero] / den[zero]
        total = terms.sum() / basis.cell_area
        kmax = shell_count * s
        density = 1.0 / (s * s * math.sqrt(3) / 2)  # dual points per unit area
        tail = omega**2 * 2 * np.pi * density / (2 * kmax**2) / basis.cell_area
        return DirectSum(complex(total), float(tail), int(len(k)))
    if omega == 0:
        k, k2, ph, den = k[~zero], k2[~zero], ph[~zero], den[~zero]
    shell = np.ceil(np.sqrt(k2) / s - 1e-12).astype(int)
    shell = np.clip(shell, 0, shell_count)
    per_shell = np.bincount(shell, weights=(ph / den).real, minlength=shell_count + 1) + 1j * np.bincount(
        shell, weights=(ph / den).imag, minlength=shell_count + 1
    )
    partial = np.cumsum(per_shell) / basis.cell_area
    window = partial[shell_count // 2 + 1:]
    value = window.mean()
    tail = float(np.max(np.abs(window - value)))
    return DirectSum(complex(value), tail, int(len(k)))
