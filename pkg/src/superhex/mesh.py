"""Uniform-angle Nystrom grids on the inclusion boundaries."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import InclusionLayout


@dataclass(frozen=True)
class BoundaryMesh:
    """Nodes ``c_j + r (cos t_k, sin t_k)`` with ``t_k = 2 pi k / N``.

    Arrays are flattened inclusion-major: node ``k`` of circle ``j`` sits at
    index ``j * N + k``.
    """

    layout: InclusionLayout = field(repr=False)
    n_per_circle: int
    angles: np.ndarray
    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    owner: np.ndarray

    @property
    def radius(self) -> float:
        return self.layout.radius

    @property
    def circles(self) -> int:
        return self.layout.count

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def curvature(self) -> float:
        return 1.0 / self.layout.radius

    @property
    def spacing(self) -> float:
        """Arc length between neighbouring nodes."""
        return 2 * np.pi * self.radius / self.n_per_circle

    def block(self, j: int) -> slice:
        """Index range of circle ``j`` (zero based)."""
        if not 0 <= j < self.circles:
            raise IndexError(f"inclusion index {j} out of range for {self.circles} circles")
        n = self.n_per_circle
        return slice(j * n, (j + 1) * n)

    def distance_to_boundary(self, x) -> np.ndarray:
        """Signed distance to the nearest circle (negative inside), ignoring lattice images."""
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        d = np.linalg.norm(x[:, None, :] - self.layout.centers[None], axis=2) - self.radius
        return d.min(axis=1)


def discretize(layout: InclusionLayout, n: int = 64) -> BoundaryMesh:
    if int(n) != n or n < 8 or n % 2:
        raise ValueError(f"node count per circle must be an even integer >= 8, got {n}")
    n = int(n)
    t = 2 * np.pi * np.arange(n) / n
    unit = np.column_stack([np.cos(t), np.sin(t)])
    m = layout.count
    points = (layout.centers[:, None, :] + layout.radius * unit[None]).reshape(-1, 2)
    normals = np.tile(unit, (m, 1))
    weights = np.full(m * n, 2 * np.pi * layout.radius / n)
    owner = np.repeat(np.arange(m), n)
    return BoundaryMesh(layout, n, np.tile(t, m), points, normals, weights, owner)


def _check_density(d, mesh: BoundaryMesh) -> np.ndarray:
    d = np.asarray(d)
    if d.shape[0] != mesh.size:
        raise ValueError(f"density has {d.shape[0]} entries, mesh has {mesh.size} nodes")
    return d


def integrate(d, mesh: BoundaryMesh, subset=None):
    """Trapezoid rule over the circles in ``subset`` (zero-based indices, default all).

    ``d`` may carry trailing axes; they are preserved.
    """
    d = _check_density(d, mesh)
    if subset is None:
        mask = np.ones(mesh.size, bool)
    else:
        subset = np.atleast_1d(subset)
        if np.any((subset < 0) | (subset >= mesh.circles)):
            raise IndexError(f"inclusion indices {subset.tolist()} out of range")
        mask = np.isin(mesh.owner, subset)
    w = mesh.weights * mask
    return np.tensordot(w, d, axes=(0, 0))


def integrate_per_circle(d, mesh: BoundaryMesh) -> np.ndarray:
    """Integrals over each circle; shape ``(circles,) + d.shape[1:]``."""
    d = _check_density(d, mesh)
    n = mesh.n_per_circle
    blocks = (mesh.weights[:, None] * d.reshape(mesh.size, -1)).reshape(mesh.circles, n, -1).sum(axis=1)
    return blocks.reshape((mesh.circles,) + d.shape[1:])


def indicator(j: int, mesh: BoundaryMesh) -> np.ndarray:
    """``chi`` of circle ``j`` (zero based) as a nodal density."""
    out = np.zeros(mesh.size)
    out[mesh.block(j)] = 1.0
    return out


def project_mean_zero(d, mesh: BoundaryMesh) -> np.ndarray:
    d = _check_density(d, mesh)
    total = mesh.weights.sum()
    return d - integrate(d, mesh) / total
