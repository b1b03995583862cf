"""End-to-end acceptance checks, one test per criterion.

Each test prints (and records for the terminal summary) a single line
``criterion N [PASS|FAIL] name: detail``.  Run directly with
``python tests/test_acceptance.py`` for the lines alone.
"""

import time

import numpy as np
import pytest
from scipy.linalg import svdvals
from scipy.optimize import minimize_scalar

from superhex.bands import MaterialParams, band_at, disk_samples, dispersion_roots, fit_dirac_cone, local_gap
from superhex.capacitance import eigen, periodic_capacitance, structure_report
from superhex.fields import FieldSynthesizer, GridSpec, eigenvector_span_check, parity_classify
from superhex.folding import classify_dual, coset_offsets, folded_spectrum_check, verify_folding_identity
from superhex.greens import LatticeSumParams, direct_sum_oracle, green
from superhex.lattice import build_inclusions, build_lattice, sublattice
from superhex.mesh import discretize, integrate
from superhex.operators import KernelCache, assemble_block_A, np_kernel_dimension
from superhex.oracle import energy_oracle

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # running as a plain script
    ACCEPTANCE_LINES = {}

B = build_lattice()
K1 = float(np.linalg.norm(B.k1))
RADIUS = 0.086
REFERENCE_MATERIALS = MaterialParams(1.0, 1.0, 1 / 50, 50.0)
DISPERSION_MATERIALS = MaterialParams(1.0, 1.0, 0.02, 0.02)


def record(n: int, name: str, passed: bool, detail: str) -> bool:
    line = f"criterion {n} [{'PASS' if passed else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_LINES[n] = line
    print(line)
    return passed


def test_criterion_1_green_function_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst, worst_split = 0.0, 0.0
    for _ in range(10):
        x = rng.uniform(-0.45, 0.45, 2)
        alpha = rng.uniform(-0.5, 0.5, 2) @ B.dual
        omega = float(rng.uniform(0.0, 2.5))
        vals = [green(x, alpha, omega, B, LatticeSumParams(ewald_split=e), gradient=False).value
                for e in (1.0, 2.0, 4.0, 8.0)]
        worst_split = max(worst_split, float(np.max(np.abs(np.array(vals) - vals[2]))))
        ref = direct_sum_oracle(x, alpha, omega, 400, B)
        worst = max(worst, abs(complex(vals[2]) - ref.value))
    dt = time.perf_counter() - t0
    ok = worst < 1e-4 and worst_split < 1e-10 and dt < 10
    assert record(1, "Green's function oracle", ok,
                  f"max |Ewald - direct| = {worst:.2e} (< 1e-4), split spread = {worst_split:.1e} (< 1e-10), {dt:.1f} s")


def test_criterion_2_capacitance():
    t0 = time.perf_counter()
    lay = build_inclusions(RADIUS, 0.0)
    mesh = discretize(lay, 64)
    cap = periodic_capacitance(mesh)
    off = float(np.max(np.abs(np.asarray(cap.offsets) + 1 / 6)))
    rep = structure_report(cap, lay, tol=1e-8)
    bad = [k for k, v in rep.items() if not v.passed]
    fd = energy_oracle(lay, lay.radius / 12)
    rel = float(np.max(np.abs(fd - cap.matrix) / np.abs(cap.matrix)))
    dt = time.perf_counter() - t0
    ok = off < 1e-6 and not bad and rel < 0.01 and dt < 120
    assert record(2, "capacitance", ok,
                  f"offset error {off:.1e}, structure checks {len(rep) - len(bad)}/{len(rep)}"
                  f"{' failed: ' + ','.join(bad) if bad else ''}, FD oracle max rel diff {rel:.2%}, {dt:.1f} s")


def test_criterion_3_spectral_structure():
    parts, ok = [], True
    for sigma in (-0.1, 0.0, 0.1):
        lam = eigen(periodic_capacitance(discretize(build_inclusions(RADIUS, sigma), 64))).values
        top = lam[-1]
        z = abs(lam[0]) / top
        d23 = abs(lam[2] - lam[1]) / top
        d45 = abs(lam[4] - lam[3]) / top
        gap = (lam[3] - lam[2]) / top
        ok &= z < 1e-8 and d23 < 1e-6 and d45 < 1e-6
        if sigma == 0:
            ok &= abs(gap) < 1e-6
        else:
            ok &= gap > 1e-3
        parts.append(f"sigma={sigma:+.1f}: l1/l6={z:.0e} (l4-l3)/l6={gap:.2e}")
    assert record(3, "spectral structure", bool(ok), "; ".join(parts))


def test_criterion_4_double_dirac_cone():
    mesh = discretize(build_inclusions(RADIUS, 0.0), 32)
    dirs = 2 * np.pi * np.arange(6) / 6 + 0.1
    radii = np.linspace(0.005, 0.05, 10) * K1
    shared = {}
    lower = fit_dirac_cone(np.zeros(2), dirs, radii, (2, 3), mesh, REFERENCE_MATERIALS, samples=shared)
    upper = fit_dirac_cone(np.zeros(2), dirs, radii, (4, 5), mesh, REFERENCE_MATERIALS, samples=shared)
    vdiff = abs(lower.vertex - upper.vertex) / upper.vertex
    resid = max(lower.residual, upper.residual)
    spread = max(lower.slope_spread, upper.slope_spread)
    ok = resid < 0.01 and spread < 0.02 and vdiff < 1e-4 and lower.orientation == -1 and upper.orientation == 1
    assert record(4, "double Dirac cone", ok,
                  f"vertex {upper.vertex:.5f} (shared to {vdiff:.1e}), slopes {lower.slope:.4f}/{upper.slope:.4f}, "
                  f"residual {resid:.2%}, direction spread {spread:.1e}")


def test_criterion_5_band_folding():
    t0 = time.perf_counter()
    rep = folded_spectrum_check(RADIUS, 32)
    mesh = discretize(build_inclusions(RADIUS, 0.0), 32)
    rng = np.random.default_rng(5)
    phi = rng.standard_normal(mesh.size) + 1j * rng.standard_normal(mesh.size)
    probes = []
    while len(probes) < 10:
        p = rng.uniform(-0.45, 0.45, 2)
        if np.min(np.linalg.norm(mesh.layout.centers - p, axis=1)) > 2 * RADIUS:
            probes.append(p)
    ident = max(verify_folding_identity(phi, mesh, eps, w, np.array(probes))
                for eps, w in (((0.0, 0.0), 0.0), ((0.05 * K1, 0.0), 0.0), ((0.05 * K1, 0.0), 1.0)))
    sub_inv = np.linalg.inv(sublattice(B).dual)
    offsets = coset_offsets(B)
    exact = True
    for n1 in range(-10, 11):
        for n2 in range(-10, 11):
            c = classify_dual(n1, n2)
            f = (B.dual_points(n1, n2) - offsets[c.index]) @ sub_inv
            exact &= c.reconstruct() == (n1, n2) and bool(np.allclose(f, np.rint(f), atol=1e-9))
    dt = time.perf_counter() - t0
    ok = rep.multiset_distance < 1e-6 and ident < 1e-8 and exact and dt < 60
    assert record(5, "band folding", ok,
                  f"spectrum distance {rep.multiset_distance:.1e}, identity residual {ident:.1e}, "
                  f"21x21 classification {'exact' if exact else 'WRONG'}, {dt:.1f} s")


_CRITERION_6: dict[float, tuple[bool, str]] = {}


@pytest.mark.parametrize("sigma", [-0.1, 0.1])
def test_criterion_6_gap_and_parity(sigma):
    mesh = discretize(build_inclusions(RADIUS, sigma), 32)
    pts = disk_samples(np.zeros(2), 0.2 * K1, 4, 6)
    gap = local_gap([band_at(mesh, a, REFERENCE_MATERIALS) for a in pts], 3, 4)
    cap = periodic_capacitance(mesh)
    eig = eigen(cap)
    synth = FieldSynthesizer(cap, mesh, GridSpec(n=101))
    reports = [parity_classify(synth.field(eig.vectors[:, b])) for b in (1, 2)]
    want = "odd" if sigma < 0 else "even"
    score = min(max(r.even, r.odd) for r in reports)
    span = eigenvector_span_check(eig, sigma)
    angle = max(span.lower_band_angle, span.upper_band_angle)
    ok = gap > 0 and all(r.verdict == want for r in reports) and score >= 0.99 and angle < 1e-6
    detail = (f"sigma={sigma:+.1f}: gap {gap:.3f}, bands 2-3 {reports[0].verdict}/{reports[1].verdict} "
              f"(score {score:.4f}), span angle {angle:.1e}")
    _CRITERION_6[sigma] = (ok, detail)
    record(6, "gap opening and parity flip", all(v[0] for v in _CRITERION_6.values()),
           "; ".join(v[1] for _, v in sorted(_CRITERION_6.items())))
    assert ok, detail


def _cluster_minimisers(mesh, mat, root, count=4):
    """Frequencies minimising each of the ``count`` smallest singular values near ``root``."""
    caches = {"inside": KernelCache(mesh, (0.0, 0.0), mat.kb(1.05 * root))}
    caches["outside"] = caches["inside"]
    out = []
    for k in range(count):
        f = lambda w: svdvals(assemble_block_A(mesh, (0.0, 0.0), w, mat.delta, mat.vb, mat.v0, caches=caches).matrix)[-1 - k]  # noqa: E731
        out.append(minimize_scalar(f, bounds=(0.97 * root, 1.03 * root), method="bounded",
                                   options={"xatol": 1e-9 * root}).x)
    return np.array(out)


def test_criterion_7_full_bie_cross_check():
    mesh = discretize(build_inclusions(RADIUS, 0.0), 32)
    mat = DISPERSION_MATERIALS
    worst, parts, ok = 0.0, [], True
    gamma_root = None
    for a in ((0.0, 0.0), (0.1, 0.0), (0.08, 0.12)):
        alpha = np.array(a) @ B.dual
        asym = band_at(mesh, alpha, mat).omegas
        scan = dispersion_roots(mesh, alpha, mat, (0.8 * asym[1], 1.1 * asym[5]))
        roots = np.array(scan.root_values)
        if len(roots) != 5:
            ok = False
            parts.append(f"alpha={a}: {len(roots)} roots")
            continue
        rel = float(np.max(np.abs(roots - asym[1:]) / asym[1:]))
        worst = max(worst, rel)
        if a == (0.0, 0.0):
            gamma_root = max(scan.roots, key=lambda r: r.multiplicity)
    spread = np.inf
    if gamma_root is not None and gamma_root.multiplicity >= 4:
        mins = _cluster_minimisers(mesh, mat, gamma_root.omega)
        spread = float(np.ptp(mins) / np.mean(mins))
    ok = ok and worst < 0.1 and spread < 1e-2
    parts.insert(0, f"max rel diff to asymptotic {worst:.2%} over 3 alphas, Gamma cluster "
                    f"x{getattr(gamma_root, 'multiplicity', 0)} spread {spread:.1e}")
    assert record(7, "full boundary-integral cross-check", ok, "; ".join(parts))


def test_criterion_8_layer_potential_properties():
    mesh = discretize(build_inclusions(RADIUS, 0.0), 64)
    rep = np_kernel_dimension(mesh)
    trace = float(np.max(np.abs(rep.trace_sums)) / np.max(np.abs(rep.trace_constants)))
    kst = KernelCache(mesh).np_adjoint(0.0)
    lay = mesh.layout
    rng = np.random.default_rng(8)
    adj = 0.0
    for _ in range(5):
        phi = rng.standard_normal(mesh.size)
        target = (0.5 - lay.inclusion_area / B.cell_area) * integrate(phi, mesh)
        adj = max(adj, abs(integrate(kst @ phi, mesh) - target))
    ok = rep.dimension == 5 and rep.gap_ratio >= 100 and trace < 1e-6 and adj < 1e-8
    assert record(8, "layer-potential properties", ok,
                  f"kernel dimension {rep.dimension}, gap ratio {rep.gap_ratio:.1e}, trace sum {trace:.1e}, "
                  f"adjoint identity {adj:.1e}")


if __name__ == "__main__":
    import sys

    failures = 0
    for name, fn in sorted(globals().items()):
        if not name.startswith("test_criterion"):
            continue
        args = [[-0.1], [0.1]] if name.startswith("test_criterion_6") else [[]]
        for a in args:
            try:
                fn(*a)
            except AssertionError:
                failures += 1
    sys.exit(1 if failures else 0)
