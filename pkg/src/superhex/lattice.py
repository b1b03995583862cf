"""Hexagonal lattice, its dual, and the six-disk inclusion layout.

All lengths are in units of the lattice constant ``|l1| = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SQRT3 = np.sqrt(3.0)

# -pi/3 rotation, reflections about the x- and y-axes
ROTATION = np.array([[0.5, SQRT3 / 2], [-SQRT3 / 2, 0.5]])
REFLECT_X = np.array([[1.0, 0.0], [0.0, -1.0]])
REFLECT_Y = np.array([[-1.0, 0.0], [0.0, 1.0]])
INVERSION = -np.eye(2)

MAX_RADIUS = 1.0 / 8.0


class GeometryError(ValueError):
    """Raised for inadmissible inclusion layouts."""


@dataclass(frozen=True)
class LatticeBasis:
    """Direct basis ``l1, l2`` and dual basis ``k1, k2`` with ``k_i . l_j = 2 pi delta_ij``."""

    l1: np.ndarray
    l2: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    cell_area: float
    variant: str = "full"

    @property
    def direct(self) -> np.ndarray:
        return np.vstack([self.l1, self.l2])

    @property
    def dual(self) -> np.ndarray:
        return np.vstack([self.k1, self.k2])

    def duality_residual(self) -> float:
        return float(np.max(np.abs(self.dual @ self.direct.T - 2 * np.pi * np.eye(2))))

    def points(self, n1, n2) -> np.ndarray:
        """Lattice points ``n1*l1 + n2*l2`` for integer arrays ``n1, n2``."""
        n1 = np.asarray(n1, dtype=float)
        n2 = np.asarray(n2, dtype=float)
        return n1[..., None] * self.l1 + n2[..., None] * self.l2

    def dual_points(self, n1, n2) -> np.ndarray:
        n1 = np.asarray(n1, dtype=float)
        n2 = np.asarray(n2, dtype=float)
        return n1[..., None] * self.k1 + n2[..., None] * self.k2

    def fractional(self, x) -> np.ndarray:
        """Coordinates of ``x`` in the ``(l1, l2)`` basis."""
        return np.asarray(x, dtype=float) @ np.linalg.inv(self.direct)


def _dual_of(l1: np.ndarray, l2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # rows of 2*pi*inv(L)^T with L having l1, l2 as rows
    k = 2 * np.pi * np.linalg.inv(np.vstack([l1, l2])).T
    return k[0], k[1]


def build_lattice() -> LatticeBasis:
    l1 = np.array([0.5, -SQRT3 / 2])
    l2 = np.array([0.5, SQRT3 / 2])
    k1, k2 = _dual_of(l1, l2)
    area = abs(l1[0] * l2[1] - l1[1] * l2[0])
    return LatticeBasis(l1, l2, k1, k2, float(area), "full")


def sublattice(basis: LatticeBasis) -> LatticeBasis:
    """The finer lattice of the super honeycomb configuration (cell area |Y|/3).

    The dual basis is ``2k1 - k2, 2k2 - k1``; the direct basis is its dual,
    ``(2l1 + l2)/3`` and ``(l1 + 2l2)/3``.
    """
    l1 = (2 * basis.l1 + basis.l2) / 3
    l2 = (basis.l1 + 2 * basis.l2) / 3
    k1 = 2 * basis.k1 - basis.k2
    k2 = 2 * basis.k2 - basis.k1
    return LatticeBasis(l1, l2, k1, k2, basis.cell_area / 3, "sub")


def high_symmetry_points(basis: LatticeBasis) -> dict[str, np.ndarray]:
    return {
        "G": np.zeros(2),
        "alpha1": basis.k1.copy(),
        "alpha2": basis.k2.copy(),
        "M1": -0.5 * (basis.k1 + basis.k2),
        "M2": 0.5 * (basis.k1 + basis.k2),
    }


def min_image_distance(p, q, basis: LatticeBasis, reach: int = 2) -> float:
    """``min_n |p + n - q|`` over lattice translations ``n``.

    A ``(2*reach+1)^2`` block of translations around the fractional offset is
    searched; ``reach=2`` is ample for points within one cell of each other.
    """
    d = np.asarray(p, dtype=float) - np.asarray(q, dtype=float)
    f = np.rint(basis.fractional(d))
    d = d - f @ basis.direct
    r = np.arange(-reach, reach + 1)
    n1, n2 = np.meshgrid(r, r, indexing="ij")
    cand = d + basis.points(n1.ravel(), n2.ravel())
    return float(np.min(np.linalg.norm(cand, axis=1)))


@dataclass(frozen=True)
class InclusionLayout:
    """Disks of common ``radius`` centred at ``centers`` inside one cell of ``basis``."""

    radius: float
    sigma: float
    centers: np.ndarray
    basis: LatticeBasis = field(repr=False)
    variant: str = "full"

    @property
    def count(self) -> int:
        return len(self.centers)

    @property
    def label(self) -> str:
        if self.sigma < 0:
            return "contracted"
        if self.sigma > 0:
            return "dilated"
        return "super-honeycomb"

    @property
    def inclusion_area(self) -> float:
        return self.count * np.pi * self.radius**2

    def subcell(self) -> "InclusionLayout":
        """Disks D1, D2 on the fine lattice; only meaningful for sigma = 0."""
        if self.variant != "full":
            raise GeometryError("sub-cell layout requires the six-disk layout")
        if not np.isclose(self.sigma, 0.0, atol=1e-14):
            raise GeometryError(
                "sub-lattice invariance holds only for the super honeycomb layout (sigma = 0)"
            )
        return InclusionLayout(
            self.radius, self.sigma, self.centers[:2].copy(), sublattice(self.basis), "sub"
        )


def build_inclusions(radius: float, sigma: float, basis: LatticeBasis | None = None) -> InclusionLayout:
    """Six disks with centres ``c_j = R^{j-1} (-(1+sigma) l1 / 3)``."""
    basis = basis or build_lattice()
    if not radius > 0:
        raise GeometryError(f"radius must be positive, got {radius}")
    if radius >= MAX_RADIUS:
        raise GeometryError(f"radius {radius} violates the diameter bound radius < 1/8")
    first = -(1.0 + sigma) * basis.l1 / 3.0
    centers = [first]
    for _ in range(5):
        centers.append(ROTATION @ centers[-1])
    centers = np.array(centers)
    layout = InclusionLayout(float(radius), float(sigma), centers, basis, "full")
    _check_disjoint(layout)
    return layout


def _check_disjoint(layout: InclusionLayout) -> None:
    c = layout.centers
    for i in range(len(c)):
        for j in range(len(c)):
            d = min_image_distance(c[i], c[j], layout.basis)
            if i == j:
                # self-images: distance to the nearest nonzero translation
                d = min(np.linalg.norm(layout.basis.l1), np.linalg.norm(layout.basis.l2))
            if d <= 2 * layout.radius:
                raise GeometryError(
                    f"disks {i + 1} and {j + 1} overlap (image distance {d:.4g} <= {2 * layout.radius:.4g})"
                )


def same_point_set(a: np.ndarray, b: np.ndarray, basis: LatticeBasis, tol: float = 1e-12) -> bool:
    """True when the two point sets coincide modulo the lattice."""
    if len(a) != len(b):
        return False
    used = set()
    for p in a:
        hit = None
        for j, q in enumerate(b):
            if j not in used and min_image_distance(p, q, basis) < tol:
                hit = j
                break
        if hit is None:
            return False
        used.add(hit)
    return True
