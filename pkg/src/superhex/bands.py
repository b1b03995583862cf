"""Subwavelength bands: capacitance asymptotics, Dirac-cone fits and full BIE roots.

The leading-order frequencies are ``omega_n = sqrt(delta lambda_n v_b^2 / |D_1|)``
with ``|D_1|`` the area of one inclusion (``6 delta lambda_n v_b^2 / |D|`` for
the six-disk cell).
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import svdvals
from scipy.optimize import minimize_scalar

from .capacitance import eigen, periodic_capacitance, quasiperiodic_capacitance
from .greens import DEFAULT_PARAMS, LatticeSumParams
from .lattice import high_symmetry_points
from .mesh import BoundaryMesh
from .operators import KernelCache, assemble_block_A

NEGATIVE_TOL = 1e-10


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class MaterialParams:
    """Densities and bulk moduli outside (``0``) and inside (``1``) the inclusions."""

    rho0: float = 1.0
    kappa0: float = 1.0
    rho1: float = 1.0 / 50.0
    kappa1: float = 50.0

    def __post_init__(self):
        for name in ("rho0", "kappa0", "rho1", "kappa1"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.delta >= 0.1:
            warnings.warn(f"contrast delta = {self.delta:.3g} is not small; asymptotics unreliable", stacklevel=2)

    @property
    def delta(self) -> float:
        return self.rho1 / self.rho0

    @property
    def v0(self) -> float:
        return math.sqrt(self.kappa0 / self.rho0)

    @property
    def vb(self) -> float:
        return math.sqrt(self.kappa1 / self.rho1)

    def k0(self, omega: float) -> float:
        return omega / self.v0

    def kb(self, omega: float) -> float:
        return omega / self.vb


@dataclass(frozen=True)
class BandSample:
    alpha: np.ndarray
    omegas: np.ndarray
    source: str = "capacitance"
    eigenvalues: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class ConeFit:
    vertex: float
    slope: float
    residual: float
    directions: np.ndarray
    slopes: np.ndarray
    vertices: np.ndarray
    orientation: int
    branches: tuple

    @property
    def slope_spread(self) -> float:
        """``(max - min) / mean`` of the per-direction slopes."""
        return float(np.ptp(self.slopes) / np.mean(self.slopes))

    def to_dict(self) -> dict:
        return {
            "vertex": self.vertex,
            "slope": self.slope,
            "residual": self.residual,
            "slope_spread": self.slope_spread,
            "orientation": self.orientation,
            "branches": list(self.branches),
            "directions": self.directions.tolist(),
            "slopes": self.slopes.tolist(),
            "vertices": self.vertices.tolist(),
        }


def frequency_prefactor(mat: MaterialParams, radius: float) -> float:
    """``delta v_b^2 / |D_1|``: multiply an eigenvalue by this and take the root."""
    return mat.delta * mat.vb**2 / (math.pi * radius**2)


def asymptotic_bands(eigenvalues, mat: MaterialParams, layout, alpha=(0.0, 0.0)) -> BandSample:
    vals = np.asarray(getattr(eigenvalues, "values", eigenvalues), dtype=float)
    if np.any(vals < -NEGATIVE_TOL * max(1.0, np.max(np.abs(vals)))):
        raise ValueError(f"negative capacitance eigenvalue {vals.min():.3g}")
    vals = np.clip(vals, 0.0, None)
    om = np.sqrt(frequency_prefactor(mat, layout.radius) * vals)
    return BandSample(np.asarray(alpha, dtype=float), np.sort(om), "capacitance", vals)


def capacitance_at(mesh: BoundaryMesh, alpha, params: LatticeSumParams = DEFAULT_PARAMS):
    """``C^alpha``, switching to the periodic solve within ``1e-4 |k1|`` of a dual lattice point."""
    alpha = np.asarray(alpha, dtype=float)
    basis = mesh.layout.basis
    f = np.rint(alpha @ np.linalg.inv(basis.dual))
    q = f @ basis.dual
    if np.linalg.norm(alpha - q) < 1e-4 * np.linalg.norm(basis.k1) and not np.any(f):
        return periodic_capacitance(mesh, params)
    return quasiperiodic_capacitance(mesh, alpha, params)


def band_at(mesh: BoundaryMesh, alpha, mat: MaterialParams, params: LatticeSumParams = DEFAULT_PARAMS) -> BandSample:
    c = capacitance_at(mesh, alpha, params)
    return asymptotic_bands(eigen(c), mat, mesh.layout, alpha)


def parse_path(spec: str, basis) -> tuple[list[np.ndarray], int]:
    """``"M1,G,M2:81"`` into vertex list and total sample count."""
    names, _, count = spec.partition(":")
    pts = high_symmetry_points(basis)
    alias = {"G": "G", "GAMMA": "G", "M1": "M1", "M2": "M2", "K1": "alpha1", "K2": "alpha2",
             "ALPHA1": "alpha1", "ALPHA2": "alpha2"}
    verts = []
    for n in names.split(","):
        key = alias.get(n.strip().upper())
        if key is None:
            raise ValueError(f"unknown path vertex {n!r}")
        verts.append(pts[key])
    if len(verts) < 2:
        raise ValueError("path needs at least two vertices")
    total = int(count) if count else 81
    if total < len(verts):
        raise ValueError("sample count smaller than vertex count")
    return verts, total


def path_points(vertices, total: int) -> tuple[np.ndarray, np.ndarray]:
    """``total`` equally spaced points (in arc length) along the polyline, vertices included."""
    v = np.asarray(vertices, dtype=float)
    seg = np.linalg.norm(np.diff(v, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    s = np.linspace(0.0, cum[-1], total)
    out = np.empty((total, 2))
    for i, si in enumerate(s):
        k = min(np.searchsorted(cum, si, side="right") - 1, len(seg) - 1)
        t = (si - cum[k]) / seg[k] if seg[k] > 0 else 0.0
        out[i] = v[k] + t * (v[k + 1] - v[k])
    # snap exact vertices (Gamma in particular) against roundoff
    for vi, ci in zip(v, cum):
        j = int(np.argmin(np.abs(s - ci)))
        if abs(s[j] - ci) < 1e-12 * max(cum[-1], 1.0):
            out[j] = vi
    return out, s


def sample_band_path(path, mesh: BoundaryMesh, mat: MaterialParams,
                     params: LatticeSumParams = DEFAULT_PARAMS) -> list[BandSample]:
    return [band_at(mesh, a, mat, params) for a in np.asarray(path, dtype=float)]


def _unit(angle):
    return np.array([math.cos(angle), math.sin(angle)])


def fit_dirac_cone(center, directions, radii, branches, mesh: BoundaryMesh, mat: MaterialParams,
                   params: LatticeSumParams = DEFAULT_PARAMS, samples: dict | None = None) -> ConeFit:
    """Fit ``omega(t) = omega* + s t`` along rays ``center + t d``.

    All bands listed in ``branches`` (1-based) are fitted by one line per
    direction; the slope sign is the cone orientation (``-1`` for a branch
    below the vertex).  ``residual`` is the worst root-mean-square misfit
    relative to the cone's rise ``|s| t_max`` over the fitted disk.

    ``directions`` are angles (radians) or unit vectors; ``radii`` are the
    distances ``t``.  ``samples`` may carry precomputed ``{(direction index,
    radius index): BandSample}`` entries to share work between branch pairs.
    """
    center = np.asarray(center, dtype=float)
    dirs = np.array([_unit(d) if np.ndim(d) == 0 else np.asarray(d, float) / np.linalg.norm(d) for d in directions])
    radii = np.asarray(radii, dtype=float)
    if len(dirs) < 3:
        raise ValueError("need at least three directions")
    if np.any(radii <= 0):
        raise ValueError("radii must be positive")
    idx = np.asarray(branches) - 1
    slopes, verts, resid = [], [], []
    for di, d in enumerate(dirs):
        ts, ws = [], []
        for ri, t in enumerate(radii):
            key = (di, ri)
            s = samples.get(key) if samples is not None else None
            if s is None:
                s = band_at(mesh, center + t * d, mat, params)
                if samples is not None:
                    samples[key] = s
            for k in idx:
                ts.append(t)
                ws.append(s.omegas[k])
        ts, ws = np.array(ts), np.array(ws)
        design = np.column_stack([np.ones_like(ts), ts])
        coef, *_ = np.linalg.lstsq(design, ws, rcond=None)
        fit = design @ coef
        span = abs(coef[1]) * radii.max()
        rms = float(np.sqrt(np.mean((ws - fit) ** 2)))
        verts.append(coef[0])
        slopes.append(coef[1])
        resid.append(rms / span if span > 0 else np.inf)
    slopes = np.array(slopes)
    sign = int(np.sign(np.mean(slopes)))
    if np.any(np.sign(slopes) != sign):
        raise FitError("branch slopes change sign between directions")
    residual = float(max(resid))
    if residual > 0.1:
        raise FitError(f"cone fit residual {residual:.3g} exceeds 10% of the fitted range")
    return ConeFit(float(np.mean(verts)), float(np.mean(np.abs(slopes))), residual, dirs,
                   np.abs(slopes), np.array(verts), sign, tuple(int(b) for b in branches))


def local_gap(samples, lower: int, upper: int) -> float:
    """``max(0, min omega_upper - max omega_lower)`` over the samples (1-based band indices)."""
    lo = max(s.omegas[lower - 1] for s in samples)
    hi = min(s.omegas[upper - 1] for s in samples)
    return float(max(0.0, hi - lo))


def disk_samples(center, radius: float, rings: int, per_ring: int) -> np.ndarray:
    """Bloch vectors on concentric rings around ``center`` (centre included)."""
    pts = [np.asarray(center, dtype=float)]
    for i in range(1, rings + 1):
        t = radius * i / rings
        for k in range(per_ring):
            pts.append(center + t * _unit(2 * math.pi * k / per_ring + 0.1))
    return np.array(pts)


# ---------------------------------------------------------------------------
# characteristic values of the full block operator


@dataclass(frozen=True)
class Root:
    omega: float
    smin: float
    multiplicity: int


@dataclass
class DispersionScan:
    omegas: np.ndarray
    smin: np.ndarray
    roots: list
    norm: float
    flags: list = field(default_factory=list)

    @property
    def root_values(self) -> list[float]:
        out = []
        for r in self.roots:
            out.extend([r.omega] * r.multiplicity)
        return out


def _resonances(alpha, basis, v0, vb, window):
    """Empty-lattice frequencies ``v |alpha + q|`` inside the window."""
    out = []
    lo, hi = window
    kmax = hi / min(v0, vb)
    from .greens import _lattice_disk

    q = _lattice_disk(basis.dual, kmax + np.linalg.norm(alpha), -np.asarray(alpha, float))
    for v in (v0, vb):
        w = v * np.linalg.norm(alpha + q, axis=1)
        out.extend(w[(w >= lo) & (w <= hi)].tolist())
    return sorted(out)


def dispersion_roots(mesh: BoundaryMesh, alpha, mat: MaterialParams, window, threshold: float = 1e-6,
                     grid: int = 200, params: LatticeSumParams = DEFAULT_PARAMS,
                     multiplicity_tol: float | None = None) -> DispersionScan:
    """Frequencies in ``window`` where ``A^{alpha,omega}_delta`` is singular.

    The smallest singular value is scanned on ``grid + 1`` equispaced points,
    every interior local minimum is refined by bounded golden-section search
    to ``1e-10`` relative, and accepted when ``s_min < threshold * ||A||``.
    The multiplicity of an accepted root is the number of singular values
    below ``multiplicity_tol * ||A||`` there (default ``threshold``).
    """
    lo, hi = map(float, window)
    if not 0 < lo < hi:
        raise ValueError("window must satisfy 0 < lo < hi")
    mtol = threshold if multiplicity_tol is None else multiplicity_tol
    basis = mesh.layout.basis
    kb_max, k0_max = mat.kb(hi), mat.k0(hi)
    cin = KernelCache(mesh, alpha, kb_max, params)
    cout = cin if abs(mat.vb - mat.v0) < 1e-15 else KernelCache(mesh, alpha, k0_max, params)
    caches = {"inside": cin, "outside": cout}

    def svals(w):
        a = assemble_block_A(mesh, alpha, w, mat.delta, mat.vb, mat.v0, params, caches).matrix
        return svdvals(a), a

    flags = []
    res = _resonances(alpha, basis, mat.v0, mat.vb, (lo, hi))
    if res:
        flags.append(f"empty-lattice resonances inside window at {res}")
    ws = np.linspace(lo, hi, grid + 1)
    smin = np.empty_like(ws)
    norm = 0.0
    for i, w in enumerate(ws):
        try:
            sv, _ = svals(w)
        except Exception:  # resonance hit exactly on the grid
            smin[i] = np.nan
            continue
        smin[i] = sv[-1]
        norm = max(norm, sv[0])
    roots = []
    step = ws[1] - ws[0]
    for i in range(1, len(ws) - 1):
        if not (smin[i] <= smin[i - 1] and smin[i] <= smin[i + 1]):
            continue
        if np.isnan(smin[i - 1:i + 2]).any():
            continue
        a, b = ws[i] - step, ws[i] + step
        if any(a <= r <= b for r in res):
            flags.append(f"minimum near {ws[i]:.6g} straddles an empty-lattice resonance")
            continue
        opt = minimize_scalar(lambda w: svals(w)[0][-1], bounds=(a, b), method="bounded",
                              options={"xatol": 1e-10 * ws[i]})
        sv, _ = svals(opt.x)
        if sv[-1] < threshold * norm:
            mult = int(np.sum(sv < mtol * norm))
            roots.append(Root(float(opt.x), float(sv[-1] / norm), max(mult, 1)))
    return DispersionScan(ws, smin, roots, float(norm), flags)


# ---------------------------------------------------------------------------
# export

BAND_COLUMNS = ["alpha_x", "alpha_y", "path_parameter"] + [f"omega_{i}" for i in range(1, 7)] + ["source"]


def bands_csv(samples, params_along, header: dict | None = None) -> str:
    buf = io.StringIO()
    for k, v in (header or {}).items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BAND_COLUMNS)
    for s, p in zip(samples, params_along):
        om = list(s.omegas) + [float("nan")] * (6 - len(s.omegas))
        w.writerow([f"{s.alpha[0]:.16g}", f"{s.alpha[1]:.16g}", f"{p:.16g}"] + [f"{x:.16g}" for x in om[:6]] + [s.source])
    return buf.getvalue()
