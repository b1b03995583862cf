"""Band folding between the six-disk cell and the two-disk sub-cell.

For the super honeycomb layout (``sigma = 0``) the disks ``D3, D5`` are
translates of ``D1`` and ``D4, D6`` translates of ``D2`` by sub-lattice vectors.
The dual lattice splits into three cosets of the sub-lattice dual,
``{0, alpha1, alpha2} + span(k~1, k~2)``, and densities split accordingly into
three pieces, each quasi-periodic on the sub-lattice.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .capacitance import eigen, periodic_capacitance, quasiperiodic_capacitance
from .greens import DEFAULT_PARAMS, LatticeSumParams
from .lattice import GeometryError, InclusionLayout, build_inclusions, sublattice
from .mesh import BoundaryMesh, discretize
from .operators import potential_matrix

CLASS_LABELS = ("sub", "alpha1+sub", "alpha2+sub")
CONDITION_LIMIT = 1e8


class SymmetryError(GeometryError):
    """The layout lacks the sub-lattice translation symmetry."""


@dataclass(frozen=True)
class DualClass:
    index: int
    m1: int
    m2: int

    @property
    def label(self) -> str:
        return CLASS_LABELS[self.index]

    def reconstruct(self) -> tuple[int, int]:
        """Integer coordinates ``(n1, n2)`` of ``offset + m1 k~1 + m2 k~2`` in the ``(k1, k2)`` basis."""
        o = [(0, 0), (1, 0), (0, 1)][self.index]
        return o[0] + 2 * self.m1 - self.m2, o[1] + 2 * self.m2 - self.m1


def classify_dual(n1: int, n2: int) -> DualClass:
    """Coset of ``q = n1 k1 + n2 k2``: ``(n1 - n2) mod 3`` picks ``0, alpha1 = k1, alpha2 = k2``."""
    n1, n2 = int(n1), int(n2)
    idx = (n1 - n2) % 3
    o1, o2 = [(0, 0), (1, 0), (0, 1)][idx]
    a, b = n1 - o1, n2 - o2
    # a = 2 m1 - m2, b = 2 m2 - m1
    m1, r1 = divmod(2 * a + b, 3)
    m2, r2 = divmod(a + 2 * b, 3)
    assert r1 == 0 and r2 == 0
    return DualClass(idx, m1, m2)


def _require_symmetric(layout: InclusionLayout):
    if layout.variant != "full" or layout.count != 6:
        raise SymmetryError("folding needs the six-disk layout")
    if not np.isclose(layout.sigma, 0.0, atol=1e-14):
        raise SymmetryError(
            f"sigma = {layout.sigma}: sub-lattice translation invariance holds only for the super honeycomb layout"
        )


def coset_offsets(basis) -> np.ndarray:
    return np.vstack([np.zeros(2), basis.k1, basis.k2])


# disks 1, 3, 5 are translates of disk 1 and disks 2, 4, 6 of disk 2
GROUPS = ((0, 2, 4), (1, 3, 5))


def phase_matrix(layout: InclusionLayout, epsilon, group: int) -> np.ndarray:
    """``M[r, c] = exp(i (epsilon + o_c) . (x_r - x_base))`` for the disks of one group."""
    c = layout.centers
    members = GROUPS[group]
    shifts = c[list(members)] - c[members[0]]
    beta = np.asarray(epsilon, float) + coset_offsets(layout.basis)
    return np.exp(1j * shifts @ beta.T)


@dataclass(frozen=True)
class DensitySplit:
    components: np.ndarray  # (3, nodes) on the six-disk mesh
    restricted: np.ndarray  # (3, 2 * N) on disks 1 and 2
    epsilon: np.ndarray

    def total(self) -> np.ndarray:
        return self.components.sum(axis=0)


def decompose_density(phi, mesh: BoundaryMesh, epsilon=(0.0, 0.0)) -> DensitySplit:
    """Split ``phi`` into pieces quasi-periodic of type ``epsilon``, ``alpha1+epsilon``, ``alpha2+epsilon``."""
    _require_symmetric(mesh.layout)
    phi = np.asarray(phi, dtype=complex)
    n = mesh.n_per_circle
    comps = np.zeros((3, mesh.size), dtype=complex)
    restricted = np.zeros((3, 2 * n), dtype=complex)
    for g, members in enumerate(GROUPS):
        m = phase_matrix(mesh.layout, epsilon, g)
        cond = np.linalg.cond(m)
        if cond > CONDITION_LIMIT:
            raise np.linalg.LinAlgError(f"phase system condition number {cond:.3g} exceeds {CONDITION_LIMIT:g}")
        rhs = np.vstack([phi[mesh.block(j)] for j in members])
        f = np.linalg.solve(m, rhs)  # (3 types, n)
        restricted[:, g * n:(g + 1) * n] = f
        for r, j in enumerate(members):
            comps[:, mesh.block(j)] = m[r][:, None] * f
    return DensitySplit(comps, restricted, np.asarray(epsilon, dtype=float))


def sub_mesh(mesh: BoundaryMesh) -> BoundaryMesh:
    return discretize(mesh.layout.subcell(), mesh.n_per_circle)


def verify_folding_identity(phi, mesh: BoundaryMesh, epsilon, omega: float, probes,
                            params: LatticeSumParams = DEFAULT_PARAMS) -> float:
    """Max discrepancy between ``S_D^{eps,omega}[phi]`` and the three sub-cell potentials at ``probes``."""
    _require_symmetric(mesh.layout)
    probes = np.asarray(probes, dtype=float).reshape(-1, 2)
    eps = np.asarray(epsilon, dtype=float)
    lhs = potential_matrix(mesh, probes, eps, omega, params, near_correction=False) @ np.asarray(phi)
    split = decompose_density(phi, mesh, eps)
    sm = sub_mesh(mesh)
    rhs = np.zeros(len(probes), dtype=complex)
    for k, o in enumerate(coset_offsets(mesh.layout.basis)):
        rhs += potential_matrix(sm, probes, eps + o, omega, params, near_correction=False) @ split.restricted[k]
    return float(np.max(np.abs(lhs - rhs)))


@dataclass
class FoldReport:
    full: np.ndarray
    sub: dict
    union: np.ndarray
    multiset_distance: float
    k_point_difference: float
    checks: dict

    def to_json(self, header: dict | None = None) -> str:
        payload = {
            "metadata": header or {},
            "full_eigenvalues": self.full.tolist(),
            "sub_eigenvalues": {k: v.tolist() for k, v in self.sub.items()},
            "multiset_distance": self.multiset_distance,
            "k_point_difference": self.k_point_difference,
            "checks": self.checks,
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def subcell_capacitance(smesh: BoundaryMesh, alpha, params: LatticeSumParams = DEFAULT_PARAMS):
    if not np.any(alpha):
        return periodic_capacitance(smesh, params)
    return quasiperiodic_capacitance(smesh, alpha, params)


def folded_spectrum_check(radius: float, n: int, params: LatticeSumParams = DEFAULT_PARAMS,
                          rel_tol: float = 1e-6) -> FoldReport:
    """Compare ``eig C^0`` of the six-disk cell with the sub-cell spectra at ``0, k1, k2``."""
    layout = build_inclusions(radius, 0.0)
    mesh = discretize(layout, n)
    full = eigen(periodic_capacitance(mesh, params)).values
    smesh = sub_mesh(mesh)
    b = layout.basis
    sub = {name: eigen(subcell_capacitance(smesh, a, params)).values
           for name, a in (("G", np.zeros(2)), ("alpha1", b.k1), ("alpha2", b.k2))}
    union = np.sort(np.concatenate(list(sub.values())))
    scale = np.max(np.abs(full))
    dist = float(np.max(np.abs(np.sort(full) - union)) / scale)
    kdiff = float(np.max(np.abs(sub["alpha1"] - sub["alpha2"])) / scale)
    checks = {
        "multiset_match": {"passed": dist < rel_tol, "value": dist, "tolerance": rel_tol},
        "k_points_degenerate": {"passed": kdiff < 1e-8, "value": kdiff, "tolerance": 1e-8},
        "gamma_has_zero": {"passed": bool(abs(sub["G"][0]) < 1e-8 * scale), "value": float(sub["G"][0] / scale)},
    }
    return FoldReport(full, sub, union, dist, kdiff, checks)


def sub_basis(layout: InclusionLayout):
    return sublattice(layout.basis)
