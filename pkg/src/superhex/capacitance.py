"""Periodic and quasi-periodic capacitance matrices.

For the periodic problem the densities ``phi_j`` solve
``S^{0,0}[phi_j] = chi_j - (1/m) chi`` with mean zero (``m`` circles), and
``C_jk = -int_{dD_k} phi_j``.  Away from ``alpha = 0`` the operator
``S^{alpha,0}`` is invertible and ``phi_j = (S^{alpha,0})^{-1} chi_j``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .greens import DEFAULT_PARAMS, LatticeSumParams
from .mesh import BoundaryMesh, indicator, integrate_per_circle
from .operators import KernelCache, solve_augmented

OFFSET_TOL = 1e-6
HERMITIAN_TOL = 1e-10


class OffsetMismatchError(RuntimeError):
    pass


class CapacitanceIllConditioned(ValueError):
    pass


@dataclass(frozen=True)
class CapacitanceMatrix:
    matrix: np.ndarray
    alpha: tuple
    sigma: float
    radius: float
    nodes: int
    anti_hermitian_residual: float = 0.0
    offsets: np.ndarray | None = field(default=None, repr=False)
    densities: np.ndarray | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        m = self.matrix
        return bool(np.max(np.abs(m - m.conj().T)) <= tol * max(np.max(np.abs(m)), 1e-300))

    def metadata(self) -> dict:
        return {
            "alpha": list(self.alpha),
            "sigma": self.sigma,
            "radius": self.radius,
            "nodes_per_circle": self.nodes,
            "anti_hermitian_residual": self.anti_hermitian_residual,
        }


@dataclass(frozen=True)
class EigenDecomposition:
    values: np.ndarray
    vectors: np.ndarray
    residual: float


def _indicators(mesh: BoundaryMesh) -> np.ndarray:
    return np.column_stack([indicator(j, mesh) for j in range(mesh.circles)])


def periodic_capacitance(mesh: BoundaryMesh, params: LatticeSumParams = DEFAULT_PARAMS,
                         cache: KernelCache | None = None) -> CapacitanceMatrix:
    """``C^0`` from the augmented single-layer solves.

    Raises :class:`OffsetMismatchError` if any recovered offset differs from
    ``-1/m`` by more than ``1e-6``.
    """
    cache = cache or KernelCache(mesh, (0.0, 0.0), 0.0, params, normal_derivative=False)
    s = cache.single_layer(0.0)
    sol = solve_augmented(s, _indicators(mesh), mesh)
    expected = -1.0 / mesh.circles
    offsets = np.asarray(sol.offset)
    bad = np.abs(offsets - expected)
    if np.max(bad) > OFFSET_TOL:
        raise OffsetMismatchError(f"offsets {offsets.real} differ from {expected:.6f} by {np.max(bad):.3g}")
    c = -integrate_per_circle(sol.density, mesh).T
    c = 0.5 * (c + c.T).real
    layout = mesh.layout
    return CapacitanceMatrix(c, (0.0, 0.0), layout.sigma, layout.radius, mesh.n_per_circle, 0.0, offsets, sol.density)


def quasiperiodic_capacitance(mesh: BoundaryMesh, alpha, params: LatticeSumParams = DEFAULT_PARAMS,
                              cache: KernelCache | None = None) -> CapacitanceMatrix:
    """``C^alpha`` from plain solves with ``S^{alpha,0}``, Hermitised.

    ``alpha`` must stay at least ``1e-4 |k1|`` away from every dual lattice
    point; the anti-Hermitian part discarded by the symmetrisation is
    reported relative to the matrix norm.
    """
    alpha = np.asarray(alpha, dtype=float)
    basis = mesh.layout.basis
    scale = np.linalg.norm(basis.k1)
    # distance from alpha to the nearest dual lattice point
    f = np.rint(alpha @ np.linalg.inv(basis.dual))
    near = min(np.linalg.norm(alpha - (f + np.array(o)) @ basis.dual)
               for o in [(0, 0), (1, 0), (0, 1), (-1, 0), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)])
    if near < 1e-4 * scale:
        raise CapacitanceIllConditioned(
            f"|alpha - q| = {near:.3g} is below 1e-4 |k1|; use periodic_capacitance at alpha = 0"
        )
    cache = cache or KernelCache(mesh, alpha, 0.0, params, normal_derivative=False)
    s = cache.single_layer(0.0)
    phi = np.linalg.solve(s, _indicators(mesh).astype(complex))
    c = -integrate_per_circle(phi, mesh).T
    herm = 0.5 * (c + c.conj().T)
    resid = float(np.linalg.norm(c - herm) / max(np.linalg.norm(herm), 1e-300))
    layout = mesh.layout
    return CapacitanceMatrix(herm, tuple(alpha.tolist()), layout.sigma, layout.radius, mesh.n_per_circle,
                             resid, None, phi)


def eigen(c: CapacitanceMatrix | np.ndarray) -> EigenDecomposition:
    m = c.matrix if isinstance(c, CapacitanceMatrix) else np.asarray(c)
    m = 0.5 * (m + m.conj().T)
    if np.all(np.isreal(m)):
        m = m.real
    vals, vecs = np.linalg.eigh(m)
    res = float(np.linalg.norm(m @ vecs - vecs * vals) / max(np.linalg.norm(m), 1e-300))
    return EigenDecomposition(vals, vecs, res)


@dataclass(frozen=True)
class Check:
    passed: bool
    margin: float
    detail: str = ""

    def to_dict(self) -> dict:
        return {"passed": self.passed, "margin": self.margin, "detail": self.detail}


def structure_report(c: CapacitanceMatrix | np.ndarray, layout=None, tol: float = 1e-8) -> dict[str, Check]:
    """Symmetry, circulant structure, sign pattern and distance ordering of a 6x6 ``C^0``.

    Margins are positive when a check passes: tolerance minus defect for the
    equalities, the gap for strict inequalities.
    """
    m = np.real_if_close(c.matrix if isinstance(c, CapacitanceMatrix) else np.asarray(c))
    if m.shape != (6, 6):
        raise ValueError("structure_report expects the six-disk matrix")
    sigma = layout.sigma if layout is not None else (c.sigma if isinstance(c, CapacitanceMatrix) else None)
    scale = np.max(np.abs(m))

    def equal(a, b, name):
        d = float(np.max(np.abs(np.asarray(a) - np.asarray(b))) / scale)
        return Check(d <= tol, tol - d, f"{name}: relative defect {d:.3e}")

    def less(a, b, name):
        g = float(b - a)
        return Check(g > 0, g / scale, f"{name}: {a:.10g} < {b:.10g}")

    idx = np.arange(6)
    circ = m[0][(idx[None, :] - idx[:, None]) % 6]
    off = m[~np.eye(6, dtype=bool)]
    out = {
        "symmetric": equal(m, m.T, "C = C^T"),
        "circulant": equal(m, circ, "C_jk = C_(k-j)"),
        "C13_eq_C15": equal(m[0, 2], m[0, 4], "C13 = C15"),
        "C12_eq_C16": equal(m[0, 1], m[0, 5], "C12 = C16"),
        "row_sums_zero": equal(m.sum(axis=1), 0.0, "row sums"),
        "diagonal_positive": Check(bool(np.all(np.diag(m) > 0)), float(np.min(np.diag(m)) / scale), "C_jj > 0"),
        "offdiagonal_negative": Check(bool(np.all(off < 0)), float(-np.max(off) / scale), "C_jk < 0"),
        "C12_lt_C13": less(m[0, 1], m[0, 2], "C12 < C13"),
        "C14_lt_C13": less(m[0, 3], m[0, 2], "C14 < C13"),
    }
    if sigma is not None and sigma == 0:
        out["C12_eq_C14"] = equal(m[0, 1], m[0, 3], "C12 = C14")
    return out


def matrix_csv(c: CapacitanceMatrix, header: dict | None = None) -> str:
    """Row-major CSV with 16 significant digits; complex entries as ``re+imj``."""
    buf = io.StringIO()
    for k, v in (header or {}).items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    m = c.matrix
    real = np.all(np.isreal(m))
    for row in m:
        if real:
            w.writerow([format_number(float(np.real(v))) for v in row])
        else:
            w.writerow([format_complex(complex(v)) for v in row])
    return buf.getvalue()


def matrix_json(c: CapacitanceMatrix, header: dict | None = None) -> str:
    m = c.matrix
    payload = {"metadata": {**c.metadata(), **(header or {})},
               "real": np.real(m).tolist(), "imag": np.imag(m).tolist()}
    return json.dumps(payload, indent=2, sort_keys=True)


def format_number(x: float) -> str:
    return f"{x:.16g}"


def format_complex(z: complex) -> str:
    return f"{z.real:.16g}{z.imag:+.16g}j"
