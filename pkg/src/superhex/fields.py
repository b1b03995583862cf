"""Asymptotic Bloch eigenfunctions at Gamma and their inversion parity.

The leading-order eigenfunction attached to a capacitance eigenvector ``v`` is
``w = sum_j v_j S^{0,0}[phi_j]``, constant inside each inclusion.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.linalg import subspace_angles

from .capacitance import CapacitanceMatrix, EigenDecomposition
from .greens import DEFAULT_PARAMS, LatticeSumParams
from .lattice import ROTATION
from .mesh import BoundaryMesh
from .operators import KernelCache, _reduce, potential_matrix

PURE_THRESHOLD = 0.99

# inversion-odd reference span and its inversion-even partner
ODD_SPAN = np.array([[1, 1, 0, -1, -1, 0], [1, 2, 1, -1, -2, -1]], dtype=float)
EVEN_SPAN = np.array([[1, -1, 0, 1, -1, 0], [1, -2, 1, 1, -2, 1]], dtype=float)


class DegenerateGapError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """``n x n`` points on ``[-half_width, half_width]^2``; ``n`` odd keeps the origin on the grid."""

    n: int = 101
    half_width: float = 1.0 / np.sqrt(3.0)

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("grid needs at least 3 points per side")
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.linspace(-self.half_width, self.half_width, self.n)
        return x, x.copy()


@dataclass(frozen=True)
class FieldGrid:
    x: np.ndarray
    y: np.ndarray
    values: np.ndarray  # (ny, nx), indexed [iy, ix]
    mask: np.ndarray  # inclusion index (0-based) or -1 outside

    def points(self) -> np.ndarray:
        X, Y = np.meshgrid(self.x, self.y)
        return np.column_stack([X.ravel(), Y.ravel()])

    def to_csv(self, header: dict | None = None) -> str:
        buf = io.StringIO()
        for k, v in (header or {}).items():
            buf.write(f"# {k}: {v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "re", "im", "mask"])
        p = self.points()
        vals = self.values.ravel()
        for (px, py), f, m in zip(p, vals, self.mask.ravel()):
            w.writerow([f"{px:.16g}", f"{py:.16g}", f"{f.real:.16g}", f"{f.imag:.16g}", int(m)])
        return buf.getvalue()


@dataclass(frozen=True)
class ParityReport:
    even: float
    odd: float
    verdict: str


class FieldSynthesizer:
    """Evaluation machinery shared by several eigenvectors on one grid."""

    def __init__(self, cap: CapacitanceMatrix, mesh: BoundaryMesh, grid: GridSpec = GridSpec(),
                 params: LatticeSumParams = DEFAULT_PARAMS):
        if cap.densities is None:
            raise ValueError("capacitance matrix carries no densities; use periodic_capacitance")
        self.mesh = mesh
        self.grid = grid
        x, y = grid.axes()
        X, Y = np.meshgrid(x, y)
        pts = np.column_stack([X.ravel(), Y.ravel()])
        layout = mesh.layout
        owner = inclusion_owner(pts, layout)
        self.x, self.y, self.owner = x, y, owner
        outside = owner < 0
        self.outside_points = pts[outside]
        self.matrix = potential_matrix(mesh, self.outside_points, (0.0, 0.0), 0.0, params)
        self.densities = np.asarray(cap.densities)  # (nodes, 6)
        # interior constants from the boundary trace of each single-layer potential
        s = KernelCache(mesh, (0.0, 0.0), 0.0, params, normal_derivative=False).single_layer(0.0)
        trace = s @ self.densities
        n = mesh.n_per_circle
        self.interior = trace.reshape(mesh.circles, n, -1).mean(axis=1)  # (circle k, density j)
        self.exterior = self.matrix @ self.densities  # (points, density j)

    def field(self, v) -> FieldGrid:
        v = np.asarray(v)
        vals = np.empty(len(self.owner), dtype=complex)
        out = self.owner < 0
        vals[out] = self.exterior @ v
        inside = ~out
        vals[inside] = (self.interior @ v)[self.owner[inside]]
        shape = (len(self.y), len(self.x))
        return FieldGrid(self.x, self.y, vals.reshape(shape), self.owner.reshape(shape))

    def interior_values(self, v) -> np.ndarray:
        return self.interior @ np.asarray(v)


def inclusion_owner(points, layout) -> np.ndarray:
    """Index of the inclusion (or lattice image of one) containing each point, else -1."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    owner = np.full(len(pts), -1)
    for j, c in enumerate(layout.centers):
        rel, _ = _reduce(pts - c, layout.basis)
        # rounding in oblique coordinates may miss the nearest image by one step
        best = np.full(len(pts), np.inf)
        for n in layout.basis.points(*np.meshgrid([-1, 0, 1], [-1, 0, 1])).reshape(-1, 2):
            best = np.minimum(best, np.linalg.norm(rel - n, axis=1))
        owner[(owner < 0) & (best < layout.radius)] = j
    return owner


def synthesize_eigenfunction(v, cap: CapacitanceMatrix, mesh: BoundaryMesh, grid: GridSpec = GridSpec(),
                             params: LatticeSumParams = DEFAULT_PARAMS) -> FieldGrid:
    """``w = sum_j v_j S^{0,0}[phi_j]`` on a grid; inclusion interiors carry their constant value."""
    return FieldSynthesizer(cap, mesh, grid, params).field(v)


def parity_classify(f: FieldGrid | np.ndarray) -> ParityReport:
    """Even and odd norm fractions under ``x -> -x`` (grid symmetric about the origin)."""
    vals = f.values if isinstance(f, FieldGrid) else np.asarray(f)
    flipped = vals[::-1, ::-1]
    even = 0.5 * (vals + flipped)
    odd = 0.5 * (vals - flipped)
    total = np.linalg.norm(vals)
    if total == 0:
        return ParityReport(1.0, 0.0, "even")
    e, o = float(np.linalg.norm(even) / total), float(np.linalg.norm(odd) / total)
    verdict = "even" if e >= PURE_THRESHOLD else "odd" if o >= PURE_THRESHOLD else "mixed"
    return ParityReport(e, o, verdict)


def rotate_vector(v, steps: int = 1) -> np.ndarray:
    """Relabel inclusion weights so that the field rotates with ``R^steps``: ``(Pv)_{j+1} = v_j``."""
    return np.roll(np.asarray(v), steps)


def rotated_points(points, steps: int = 1) -> np.ndarray:
    return np.asarray(points) @ np.linalg.matrix_power(ROTATION, steps).T


@dataclass(frozen=True)
class SpanReport:
    lower_band_angle: float  # span{v2, v3} against its expected reference span
    upper_band_angle: float  # span{v4, v5} against the other span
    lower_reference: str
    gap: float


def eigenvector_span_check(eig: EigenDecomposition, sigma: float, gap_tol: float = 1e-8) -> SpanReport:
    """Principal angles between computed eigenspaces and the odd/even reference spans.

    For contraction (``sigma < 0``) bands 2-3 are expected on the odd span,
    for dilation on the even span; bands 4-5 take the other one.
    """
    vals, vecs = eig.values, eig.vectors
    gap = float(vals[3] - vals[2])
    if sigma == 0 or abs(gap) <= gap_tol * abs(vals[-1]):
        raise DegenerateGapError("bands 3 and 4 are degenerate; eigenspaces are not separated")
    lower_ref, upper_ref = (ODD_SPAN, EVEN_SPAN) if sigma < 0 else (EVEN_SPAN, ODD_SPAN)
    lo = float(np.max(subspace_angles(vecs[:, 1:3], lower_ref.T)))
    hi = float(np.max(subspace_angles(vecs[:, 3:5], upper_ref.T)))
    return SpanReport(lo, hi, "odd" if sigma < 0 else "even", gap)
