"""Dense Nystrom discretisations of the layer potentials on circular inclusions.

Notation: ``S^{alpha,omega}`` is the single layer potential with kernel
``G^{alpha,omega}(x - y)`` and ``K*`` the adjoint Neumann-Poincare operator with
kernel ``n_x . grad G(x - y)``.  Self-interaction blocks use Kress' spectral
quadrature for ``log(4 sin^2((t - s)/2))``; all other entries use the
trapezoid rule on the smooth kernel.

The lattice sums are split the same way as in :mod:`superhex.greens`; the
spatial tables ``F_j = sum_n e^{i alpha.n} E_{j+1}(eta^2 |d - n|^2)`` do not depend
on ``omega`` so a :class:`KernelCache` built once per ``(mesh, alpha)`` assembles
operators at many frequencies for the cost of a few matrix products.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import j0, j1

from . import greens
from .greens import DEFAULT_PARAMS, LatticeSumParams
from .mesh import BoundaryMesh, integrate, integrate_per_circle

CONDITION_LIMIT = 1e12


class IllConditionedError(RuntimeError):
    pass


class NearBoundaryWarning(UserWarning):
    pass


@dataclass(frozen=True)
class OperatorMatrix:
    matrix: np.ndarray
    kind: str
    alpha: tuple
    omega: float

    @property
    def shape(self):
        return self.matrix.shape


@dataclass(frozen=True)
class AugmentedSolution:
    density: np.ndarray
    offset: complex
    condition: float


def kress_weights(n_nodes: int) -> np.ndarray:
    """``R_k`` with ``int log(4 sin^2((t_i - s)/2)) f(s) ds ~ sum_j R_{|i-j|} f(t_j)``."""
    n = n_nodes // 2
    t = 2 * np.pi * np.arange(n_nodes) / n_nodes
    m = np.arange(1, n)
    r = -(2 * np.pi / n) * (np.cos(np.outer(t, m)) / m).sum(axis=1) - (np.pi / n**2) * np.cos(n * t)
    return r


def _kress_matrix(n_nodes: int) -> np.ndarray:
    r = kress_weights(n_nodes)
    idx = np.arange(n_nodes)
    return r[(idx[:, None] - idx[None, :]) % n_nodes]


def _reduce(d: np.ndarray, basis) -> tuple[np.ndarray, np.ndarray]:
    """Split displacements as ``d = d_red + n`` with ``n`` a lattice vector."""
    f = np.rint(d @ np.linalg.inv(basis.direct))
    n = f @ basis.direct
    return d - n, n


class KernelCache:
    """Frequency-independent lattice-sum tables for targets ``x`` against mesh nodes.

    Parameters
    ----------
    mesh : BoundaryMesh
        Sources; also the targets unless ``targets`` is given.
    alpha : array_like
        Bloch vector.
    omega_max : float
        Largest frequency the cache will be asked for.  Controls the number of
        ``omega^2`` expansion terms and the spectral cutoff.
    targets, target_normals : ndarray, optional
        Off-mesh evaluation points.  When omitted the self blocks get the
        log-split (regular) treatment.
    normal_derivative : bool
        Also tabulate ``n_x . grad`` of the kernel (needs target normals).
    """

    def __init__(self, mesh: BoundaryMesh, alpha=(0.0, 0.0), omega_max: float = 0.0,
                 params: LatticeSumParams = DEFAULT_PARAMS, targets=None, target_normals=None,
                 normal_derivative: bool = True):
        self.mesh = mesh
        self.basis = mesh.layout.basis
        self.alpha = np.asarray(alpha, dtype=float)
        self.omega_max = float(omega_max)
        self.params = params
        self.on_mesh = targets is None
        x = mesh.points if targets is None else np.asarray(targets, dtype=float).reshape(-1, 2)
        nx = mesh.normals if targets is None else target_normals
        self.normal_derivative = normal_derivative and nx is not None
        self.x = x
        self.nx = None if nx is None else np.asarray(nx, dtype=float).reshape(-1, 2)
        y = mesh.points
        eta = params.ewald_split
        self.eta = eta

        # spectral factors: G_spec = ex diag(coef) ey^H
        # a k = 0 term is kept here; its weight is decided per omega
        k_all = self._all_spectral(self.omega_max)
        self.k = k_all
        self.k2 = np.einsum("ij,ij->i", k_all, k_all)
        self.ex = np.exp(1j * x @ k_all.T)
        self.ey = np.exp(1j * y @ k_all.T)

        # spatial tables on reduced displacements
        d = x[:, None, :] - y[None, :, :]
        d_red, shift = _reduce(d, self.basis)
        self.phase = np.exp(1j * shift @ self.alpha)
        self.same = None
        if self.on_mesh:
            self.same = mesh.owner[:, None] == mesh.owner[None, :]
            # self blocks never wrap: keep the raw displacement there
            d_red = np.where(self.same[..., None], d, d_red)
            self.phase = np.where(self.same, 1.0 + 0j, self.phase)
        self.d_red = d_red
        self.J = greens.helmholtz_order(self.omega_max, eta)
        self._build_spatial()

        if self.on_mesh:
            n = mesh.n_per_circle
            self.kress = _kress_matrix(n)
            self.r_same = np.linalg.norm(d, axis=2)

    def _all_spectral(self, omega_ref: float) -> np.ndarray:
        eta = self.eta
        log_tol = math.log(10.0 / self.params.abs_tol)
        kmax = math.sqrt(omega_ref**2 + 4 * eta**2 * (log_tol + 5.0))
        kmax = max(kmax, self.params.spectral_cutoff * greens._ring_radius(self.basis.dual))
        q = greens._lattice_disk(self.basis.dual, kmax + np.linalg.norm(self.alpha), -self.alpha)
        k = self.alpha + q
        keep = np.einsum("ij,ij->i", k, k) <= kmax**2
        return k[keep]

    def _build_spatial(self):
        eta, J = self.eta, self.J
        d = self.d_red
        reach = float(np.max(np.linalg.norm(d, axis=2))) if d.size else 0.0
        images = greens.image_vectors(self.basis, self.omega_max, reach, self.params)
        shape = d.shape[:2]
        F = np.zeros((J,) + shape, dtype=complex)
        Fn = np.zeros((J,) + shape, dtype=complex) if self.normal_derivative else None
        proj = None
        for n in images:
            dn = d - n
            r2 = np.einsum("...i,...i->...", dn, dn)
            z = eta**2 * r2
            is_origin = not np.any(n)
            regular = self.same if (is_origin and self.on_mesh) else None
            if regular is None and np.any(r2 < greens.SINGULAR_TOL**2):
                raise greens.SingularPointError("target coincides with a source node or its image")
            if regular is not None:
                zero_bad = (r2 < greens.SINGULAR_TOL**2) & ~regular
                if np.any(zero_bad):
                    raise greens.SingularPointError("target coincides with a source node")
            ph = np.exp(1j * (n @ self.alpha))
            if self.normal_derivative:
                proj = np.einsum("...i,...i->...", dn, self.nx[:, None, :]) * (2 * eta**2)
            with np.errstate(divide="ignore", invalid="ignore"):
                for j in range(J):
                    if regular is None:
                        e = greens.expint(j + 1, z)
                    else:
                        e = np.empty(shape)
                        e[~regular] = greens.expint(j + 1, z[~regular])
                        e[regular] = greens.expint_regular(j + 1, z[regular])
                    F[j] += ph * e
                    if Fn is not None:
                        if regular is None:
                            de = -(np.exp(-z) / z if j == 0 else greens.expint(j, z))
                        else:
                            de = np.empty(shape)
                            zo = z[~regular]
                            de[~regular] = -(np.exp(-zo) / zo if j == 0 else greens.expint(j, zo))
                            de[regular] = greens.expint_regular_deriv(j + 1, z[regular])
                        Fn[j] += ph * de * proj
        scale = -1.0 / (4 * np.pi)
        self.F = scale * F * self.phase
        self.Fn = None if Fn is None else scale * Fn * self.phase

    # -- frequency-dependent assembly ----------------------------------------

    def _spectral(self, omega: float, table: str):
        if omega > self.omega_max * (1 + 1e-12) + 1e-15:
            raise ValueError(f"omega = {omega} exceeds the cache limit {self.omega_max}")
        eta = self.eta
        den = omega**2 - self.k2
        const = 0.0
        keep = np.ones(len(den), bool)
        if omega == 0:
            zero = self.k2 < 1e-24
            if np.any(zero):
                keep = ~zero
                const = 1.0 / (4 * eta**2 * self.basis.cell_area)
        if np.any(np.abs(den[keep]) < greens.RESONANCE_TOL):
            raise greens.ResonanceError(f"omega = {omega} is an empty-lattice resonance")
        coef = np.zeros(len(den))
        coef[keep] = np.exp(den[keep] / (4 * eta**2)) / (den[keep] * self.basis.cell_area)
        if table == "value":
            return (self.ex * coef) @ self.ey.conj().T + const
        # n_x . (i k) e^{ik.(x-y)}
        nk = 1j * (self.nx @ self.k.T)
        return (self.ex * nk * coef) @ self.ey.conj().T

    def _series(self, omega: float, tables: np.ndarray) -> np.ndarray:
        c = omega**2 / (4 * self.eta**2)
        out = tables[0].copy()
        fac = 1.0
        for j in range(1, self.J):
            fac *= c / j
            out += fac * tables[j]
        return out

    def kernel(self, omega: float) -> np.ndarray:
        """``G(x_i - y_j)``; on the mesh the self blocks hold the regular part."""
        g = self._spectral(omega, "value") + self._series(omega, self.F)
        if self.on_mesh:
            r = self.r_same
            g = g + np.where(self.same, math.log(self.eta**2) / (4 * np.pi) * j0(omega * r), 0.0)
        return g

    def normal_kernel(self, omega: float) -> np.ndarray:
        if not self.normal_derivative:
            raise ValueError("cache was built without normal derivatives")
        g = self._spectral(omega, "normal") + self._series(omega, self.Fn)
        if self.on_mesh and omega != 0:
            r = self.r_same
            a = self.mesh.radius
            # n_x . grad of (log eta^2 / 4pi) J0(omega r) on a circle: d/dr J0 * r/(2a)
            g = g + np.where(self.same, math.log(self.eta**2) / (4 * np.pi) * (-omega * j1(omega * r)) * r / (2 * a), 0.0)
        return g

    def single_layer(self, omega: float = 0.0) -> np.ndarray:
        if not self.on_mesh:
            raise ValueError("single_layer needs a cache built on the mesh itself")
        mesh = self.mesh
        w = mesh.weights
        g = self.kernel(omega)
        a, n = mesh.radius, mesh.n_per_circle
        mat = g * w[None, :]
        for j in range(mesh.circles):
            b = mesh.block(j)
            r = self.r_same[b, b]
            jr = j0(omega * r)
            blk = a * (jr / (4 * np.pi) * self.kress + (2 * np.pi / n) * (jr * math.log(a) / (2 * np.pi) + g[b, b]))
            mat[b, b] = blk
        return mat

    def np_adjoint(self, omega: float = 0.0) -> np.ndarray:
        if not self.on_mesh:
            raise ValueError("np_adjoint needs a cache built on the mesh itself")
        mesh = self.mesh
        w = mesh.weights
        g = self.normal_kernel(omega)
        a, n = mesh.radius, mesh.n_per_circle
        mat = g * w[None, :]
        for j in range(mesh.circles):
            b = mesh.block(j)
            r = self.r_same[b, b]
            wr = omega * r * j1(omega * r)
            smooth = (j0(omega * r) - wr * math.log(a)) / (4 * np.pi * a) + g[b, b]
            logc = -wr / (8 * np.pi * a)
            mat[b, b] = a * (logc * self.kress + (2 * np.pi / n) * smooth)
        return mat


def _stamp(alpha) -> tuple:
    return tuple(float(v) for v in np.asarray(alpha, dtype=float))


def assemble_single_layer(mesh: BoundaryMesh, alpha=(0.0, 0.0), omega: float = 0.0,
                          params: LatticeSumParams = DEFAULT_PARAMS, cache: KernelCache | None = None) -> OperatorMatrix:
    cache = cache or KernelCache(mesh, alpha, omega, params, normal_derivative=False)
    return OperatorMatrix(cache.single_layer(omega), "single-layer", _stamp(alpha), float(omega))


def assemble_np_adjoint(mesh: BoundaryMesh, alpha=(0.0, 0.0), omega: float = 0.0,
                        params: LatticeSumParams = DEFAULT_PARAMS, cache: KernelCache | None = None) -> OperatorMatrix:
    """Matrix of ``K*[phi](x) = p.v. int n_x . grad G^{alpha,omega}(x - y) phi(y) ds``.

    The jump relation reads ``d/dn S[phi]|_(+/-) = (+/-) phi/2 + K*[phi]``.
    """
    cache = cache or KernelCache(mesh, alpha, omega, params)
    return OperatorMatrix(cache.np_adjoint(omega), "np-adjoint", _stamp(alpha), float(omega))


def assemble_block_A(mesh: BoundaryMesh, alpha, omega: float, delta: float, v_inside: float, v_outside: float,
                     params: LatticeSumParams = DEFAULT_PARAMS, caches: dict | None = None) -> OperatorMatrix:
    """``[[S^{kb}, -S^{k0}], [-I/2 + K*^{kb}, -delta (I/2 + K*^{k0})]]`` with ``k = omega / v``.

    ``caches`` may map ``"inside"``/``"outside"`` to :class:`KernelCache` objects
    built with large enough ``omega_max``; both may be the same object.
    """
    if not omega > 0:
        raise ValueError("block operator needs omega > 0")
    kb, k0 = omega / v_inside, omega / v_outside
    caches = caches or {}
    cin = caches.get("inside") or KernelCache(mesh, alpha, kb, params)
    cout = caches.get("outside") or (cin if abs(k0 - kb) < 1e-15 else KernelCache(mesh, alpha, k0, params))
    s_b, s_0 = cin.single_layer(kb), cout.single_layer(k0)
    k_b, k_0 = cin.np_adjoint(kb), cout.np_adjoint(k0)
    eye = np.eye(mesh.size)
    top = np.hstack([s_b, -s_0])
    bottom = np.hstack([-0.5 * eye + k_b, -delta * (0.5 * eye + k_0)])
    return OperatorMatrix(np.vstack([top, bottom]), "block-A", _stamp(alpha), float(omega))


def solve_augmented(S: OperatorMatrix | np.ndarray, rhs, mesh: BoundaryMesh) -> AugmentedSolution:
    """Solve ``S phi = rhs + c`` with ``int phi = 0`` for ``(phi, c)``.

    With ``rhs`` the indicator of one of six congruent circles the offset is
    ``c = -1/6``.  ``rhs`` may be a matrix of right-hand sides (one per
    column); the offset is then a vector.
    """
    mat = S.matrix if isinstance(S, OperatorMatrix) else np.asarray(S)
    n = mesh.size
    aug = np.zeros((n + 1, n + 1), dtype=np.result_type(mat, float))
    aug[:n, :n] = mat
    aug[:n, n] = -1.0
    aug[n, :n] = mesh.weights
    cond = np.linalg.cond(aug)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise IllConditionedError(f"augmented system condition number {cond:.3g} exceeds {CONDITION_LIMIT:g}")
    rhs = np.asarray(rhs)
    b = np.zeros((n + 1,) + rhs.shape[1:], dtype=np.result_type(rhs, aug))
    b[:n] = rhs
    sol = np.linalg.solve(aug, b)
    return AugmentedSolution(sol[:n], sol[n], float(cond))


def _near_weights(x: np.ndarray, center: np.ndarray, a: float, n: int) -> np.ndarray:
    """Nodal weights realising ``(1/2pi) int log|x - y| phi ds`` exactly for band-limited ``phi``."""
    rel = x - center
    rho = float(np.hypot(*rel))
    theta = math.atan2(rel[1], rel[0])
    m = np.arange(-(n // 2), n // 2 + 1)
    am = np.empty(len(m), dtype=complex)
    mm = np.abs(m[m != 0])
    q = rho / a if rho < a else a / rho
    am[m == 0] = a * math.log(max(rho, a))
    am[m != 0] = -a * q**mm * np.exp(1j * m[m != 0] * theta) / (2 * mm)
    am[0] *= 0.5
    am[-1] *= 0.5
    t = 2 * np.pi * np.arange(n) / n
    return (np.exp(-1j * np.outer(t, m)) @ am) / n


def potential_matrix(mesh: BoundaryMesh, x, alpha=(0.0, 0.0), omega: float = 0.0,
                     params: LatticeSumParams = DEFAULT_PARAMS, near_correction: bool = True,
                     near_factor: float = 1.0) -> np.ndarray:
    """Matrix mapping nodal densities to ``S[phi](x)`` at the points ``x``.

    Points within ``near_factor * radius`` of a circle (or a lattice image of
    one) get the logarithmic part of that circle's contribution from the exact
    Fourier series of the log kernel instead of the trapezoid rule.
    """
    x = np.asarray(x, dtype=float).reshape(-1, 2)
    cache = KernelCache(mesh, alpha, omega, params, targets=x, normal_derivative=False)
    mat = cache.kernel(omega) * mesh.weights[None, :]
    layout = mesh.layout
    a, n = mesh.radius, mesh.n_per_circle
    h = mesh.spacing
    alpha = np.asarray(alpha, dtype=float)
    for j, c in enumerate(layout.centers):
        rel, shift = _reduce(x - c, layout.basis)
        dist = np.linalg.norm(rel, axis=1) - a
        close = np.abs(dist) < near_factor * a
        if not near_correction:
            if np.any(np.abs(dist) < 2 * h):
                warnings.warn("evaluation point within two node spacings of the boundary", NearBoundaryWarning, stacklevel=2)
            continue
        b = mesh.block(j)
        for i in np.nonzero(close)[0]:
            xi = c + rel[i]
            ph = np.exp(1j * shift[i] @ alpha)
            trap = mesh.weights[b] * np.log(np.linalg.norm(xi - mesh.points[b], axis=1)) / (2 * np.pi)
            mat[i, b] += ph * (_near_weights(xi, c, a, n) - trap)
    return mat


def evaluate_potential(d, mesh: BoundaryMesh, x, alpha=(0.0, 0.0), omega: float = 0.0,
                       params: LatticeSumParams = DEFAULT_PARAMS, near_correction: bool = True):
    """``S^{alpha,omega}[d](x)`` at off-boundary points ``x`` (shape ``(..., 2)``)."""
    x = np.asarray(x, dtype=float)
    shape = x.shape[:-1]
    mat = potential_matrix(mesh, x, alpha, omega, params, near_correction)
    return (mat @ np.asarray(d)).reshape(shape + np.asarray(d).shape[1:])


@dataclass(frozen=True)
class KernelReport:
    dimension: int
    singular_values: np.ndarray
    gap_ratio: float
    trace_constants: np.ndarray
    trace_sums: np.ndarray
    kernel_integrals: np.ndarray


def np_kernel_dimension(mesh: BoundaryMesh, tol: float = 1e-6,
                        params: LatticeSumParams = DEFAULT_PARAMS) -> KernelReport:
    """Kernel of ``-I/2 + K*^{0,0}`` and the single-layer traces of its basis.

    For each kernel vector ``phi`` the trace ``S^{0,0}[phi]`` is constant on
    each circle; those six constants ``a_i`` are reported (averaged over each
    circle) together with their sums.
    """
    cache = KernelCache(mesh, (0.0, 0.0), 0.0, params)
    kst = cache.np_adjoint(0.0)
    s = cache.single_layer(0.0)
    op = -0.5 * np.eye(mesh.size) + kst
    _, sv, vh = np.linalg.svd(op)
    norm = sv[0]
    dim = int(np.sum(sv < tol * norm))
    kernel = vh[len(sv) - dim:].conj().T if dim else np.zeros((mesh.size, 0))
    gap = float(sv[-dim - 1] / max(sv[-dim], 1e-300)) if dim else float("inf")
    trace = s @ kernel
    consts = trace.reshape(mesh.circles, mesh.n_per_circle, -1).mean(axis=1).T
    return KernelReport(
        dimension=dim,
        singular_values=sv[::-1].copy(),
        gap_ratio=gap,
        trace_constants=consts,
        trace_sums=consts.sum(axis=1),
        kernel_integrals=np.atleast_1d(integrate(kernel, mesh)),
    )


def circle_means(values, mesh: BoundaryMesh) -> np.ndarray:
    """Average of a nodal quantity over each circle."""
    return integrate_per_circle(values, mesh) / (2 * np.pi * mesh.radius)
