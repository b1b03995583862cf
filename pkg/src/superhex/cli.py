"""Command line driver: ``superhex <command> [--config F] [--out DIR] ...``.

Artifacts go to ``<out>/<command>/<config hash>/``.  Every CSV starts with
``#`` header lines echoing the hash and parameters; every JSON carries a
``metadata`` block.  Failures write ``error.json`` and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from .bands import (MaterialParams, band_at, bands_csv, disk_samples, dispersion_roots, fit_dirac_cone,
                    local_gap, parse_path, path_points, sample_band_path)
from .capacitance import eigen, matrix_csv, matrix_json, periodic_capacitance, structure_report
from .config import ConfigError, ExperimentConfig, load_config
from .fields import FieldSynthesizer, GridSpec, eigenvector_span_check, parity_classify
from .folding import SymmetryError, folded_spectrum_check
from .greens import LatticeSumParams
from .lattice import build_inclusions
from .mesh import discretize
from .oracle import energy_oracle

COMMANDS = ("capacitance", "bands", "cone", "gap", "fold", "fields", "dispersion", "validate")


class Context:
    def __init__(self, cfg: ExperimentConfig, out: Path, command: str):
        self.cfg = cfg
        self.hash = cfg.digest()
        self.dir = out / command / self.hash
        self.dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        g = cfg.geometry
        self.layout = build_inclusions(g.radius, g.sigma)
        self.params = LatticeSumParams(ewald_split=cfg.discretization.ewald_split, abs_tol=cfg.discretization.abs_tol)
        m = cfg.materials
        self.materials = MaterialParams(m.rho0, m.kappa0, m.rho1, m.kappa1)
        self._mesh = None

    @property
    def mesh(self):
        if self._mesh is None:
            self._mesh = discretize(self.layout, self.cfg.discretization.nodes)
        return self._mesh

    def header(self) -> dict:
        return {
            "command": self.command,
            "config_hash": self.hash,
            "label": self.cfg.label,
            "params": json.dumps(self.cfg.to_dict(), sort_keys=True),
        }

    def write_text(self, name: str, text: str) -> Path:
        p = self.dir / name
        p.write_text(text, encoding="utf-8")
        return p

    def write_json(self, name: str, payload: dict) -> Path:
        meta = {**self.header(), "params": self.cfg.to_dict()}
        return self.write_text(name, json.dumps({"metadata": meta, **payload}, indent=2, sort_keys=True,
                                                default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not serialisable: {type(o)}")


def _k1(ctx) -> float:
    return float(np.linalg.norm(ctx.layout.basis.k1))


# ---------------------------------------------------------------------------
# commands


def cmd_capacitance(ctx: Context) -> bool:
    cap = periodic_capacitance(ctx.mesh, ctx.params)
    eig = eigen(cap)
    rep = structure_report(cap, ctx.layout)
    ctx.write_text("capacitance.csv", matrix_csv(cap, ctx.header()))
    ctx.write_text("capacitance.json", matrix_json(cap, ctx.header()))
    payload = {
        "offsets": np.real(cap.offsets),
        "eigenvalues": eig.values,
        "structure": {k: v.to_dict() for k, v in rep.items()},
    }
    ok = all(v.passed for v in rep.values())
    if ctx.cfg.oracle.enabled:
        h = ctx.layout.radius / ctx.cfg.oracle.cells_per_radius
        orc = energy_oracle(ctx.layout, h)
        rel = float(np.max(np.abs(orc - cap.matrix) / np.abs(cap.matrix)))
        payload["oracle"] = {"grid_spacing": h, "matrix": orc, "max_relative_difference": rel, "passed": rel < 0.01}
        ok = ok and rel < 0.01
    ctx.write_json("report.json", payload)
    return ok


def cmd_bands(ctx: Context) -> bool:
    verts, total = parse_path(f"{ctx.cfg.bands.path}:{ctx.cfg.bands.samples}", ctx.layout.basis)
    pts, s = path_points(verts, total)
    samples = sample_band_path(pts, ctx.mesh, ctx.materials, ctx.params)
    ctx.write_text("bands.csv", bands_csv(samples, s, ctx.header()))
    return True


def _cone_fits(ctx: Context):
    c = ctx.cfg.cone
    k = _k1(ctx)
    dirs = [2 * math.pi * i / c.directions + 0.1 for i in range(c.directions)]
    radii = np.linspace(c.t_min, c.t_max, c.points) * k
    shared = {}
    lower = fit_dirac_cone(np.zeros(2), dirs, radii, (2, 3), ctx.mesh, ctx.materials, ctx.params, shared)
    upper = fit_dirac_cone(np.zeros(2), dirs, radii, (4, 5), ctx.mesh, ctx.materials, ctx.params, shared)
    return lower, upper


def cmd_cone(ctx: Context) -> bool:
    lower, upper = _cone_fits(ctx)
    shared = abs(lower.vertex - upper.vertex) / abs(lower.vertex)
    ok = lower.residual < 0.01 and upper.residual < 0.01 and max(lower.slope_spread, upper.slope_spread) < 0.02
    if ctx.cfg.geometry.sigma == 0:
        ok = ok and shared < 1e-4
    ctx.write_json("cone.json", {"lower": lower.to_dict(), "upper": upper.to_dict(),
                                 "vertex_relative_difference": shared, "passed": ok})
    return ok


def cmd_gap(ctx: Context) -> bool:
    g = ctx.cfg.gap
    pts = disk_samples(np.zeros(2), g.radius * _k1(ctx), g.rings, g.per_ring)
    samples = sample_band_path(pts, ctx.mesh, ctx.materials, ctx.params)
    gap = local_gap(samples, 3, 4)
    rel = gap / samples[0].omegas[-1]
    ctx.write_text("samples.csv", bands_csv(samples, np.linalg.norm(pts, axis=1), ctx.header()))
    expected_open = ctx.cfg.geometry.sigma != 0
    ok = (gap > 0) if expected_open else (gap < 1e-6 * samples[0].omegas[-1])
    ctx.write_json("gap.json", {"gap": gap, "relative_gap": rel, "lower_band": 3, "upper_band": 4,
                                "expected_open": expected_open, "passed": ok})
    return ok


def cmd_fold(ctx: Context) -> bool:
    if ctx.cfg.geometry.sigma != 0:
        raise SymmetryError(
            f"band folding requires the super honeycomb layout (sigma = 0); got sigma = {ctx.cfg.geometry.sigma}: "
            "the sub-lattice translation invariance of the inclusions is broken"
        )
    rep = folded_spectrum_check(ctx.layout.radius, ctx.cfg.discretization.nodes, ctx.params)
    ctx.write_text("fold.json", rep.to_json({**ctx.header(), "params": ctx.cfg.to_dict()}) + "\n")
    return all(c["passed"] for c in rep.checks.values())


def cmd_fields(ctx: Context) -> bool:
    cap = periodic_capacitance(ctx.mesh, ctx.params)
    eig = eigen(cap)
    synth = FieldSynthesizer(cap, ctx.mesh, GridSpec(ctx.cfg.discretization.grid), ctx.params)
    parity = {}
    for n in range(6):
        f = synth.field(eig.vectors[:, n])
        ctx.write_text(f"field_band{n + 1}.csv", f.to_csv({**ctx.header(), "band": n + 1,
                                                            "eigenvalue": f"{eig.values[n]:.16g}"}))
        p = parity_classify(f)
        parity[f"band{n + 1}"] = {"even": p.even, "odd": p.odd, "verdict": p.verdict}
    payload = {"eigenvalues": eig.values, "parity": parity}
    ok = True
    sigma = ctx.cfg.geometry.sigma
    if sigma != 0:
        span = eigenvector_span_check(eig, sigma)
        expect = "odd" if sigma < 0 else "even"
        ok = (span.lower_band_angle < 1e-6 and span.upper_band_angle < 1e-6
              and parity["band2"]["verdict"] == expect and parity["band3"]["verdict"] == expect)
        payload["span_check"] = {"lower_band_angle": span.lower_band_angle, "upper_band_angle": span.upper_band_angle,
                                 "expected_parity_bands_2_3": expect}
    payload["passed"] = ok
    ctx.write_json("parity.json", payload)
    return ok


def cmd_dispersion(ctx: Context) -> bool:
    d = ctx.cfg.dispersion
    mat = MaterialParams(d.rho0, d.kappa0, d.rho1, d.kappa1)
    mesh = discretize(ctx.layout, d.nodes)
    basis = ctx.layout.basis
    rows, ok = [], True
    for a in d.alphas:
        alpha = np.asarray(a) @ basis.dual
        asym = band_at(mesh, alpha, mat, ctx.params).omegas
        window = (0.8 * asym[1], 1.1 * asym[5])
        scan = dispersion_roots(mesh, alpha, mat, window, d.threshold, d.grid, ctx.params)
        roots = scan.root_values
        entry = {"alpha": alpha, "asymptotic": asym, "window": window,
                 "roots": [{"omega": r.omega, "smin_relative": r.smin, "multiplicity": r.multiplicity} for r in scan.roots],
                 "flags": scan.flags}
        if len(roots) == 5:
            rel = np.abs(np.array(roots) - asym[1:]) / asym[1:]
            entry["relative_difference"] = rel
            ok = ok and bool(np.all(rel < 0.1))
        else:
            entry["relative_difference"] = None
            ok = False
        rows.append(entry)
    ctx.write_json("dispersion.json", {"materials": {"delta": mat.delta, "vb": mat.vb, "v0": mat.v0},
                                       "samples": rows, "passed": ok})
    return ok


def cmd_validate(ctx: Context) -> bool:
    from .validation import run_checks

    results = run_checks(ctx.cfg)
    ok = all(r["passed"] for r in results.values())
    ctx.write_json("validate.json", {"checks": results, "passed": ok})
    return ok


HANDLERS = {
    "capacitance": cmd_capacitance,
    "bands": cmd_bands,
    "cone": cmd_cone,
    "gap": cmd_gap,
    "fold": cmd_fold,
    "fields": cmd_fields,
    "dispersion": cmd_dispersion,
    "validate": cmd_validate,
}


def run_command(cmd: str, cfg: ExperimentConfig, out="out") -> int:
    """Run one pipeline; returns the exit status (0 when all its checks pass)."""
    if cmd not in HANDLERS:
        raise ValueError(f"unknown command {cmd!r}")
    out = Path(out)
    ctx = Context(cfg, out, cmd)
    t0 = time.perf_counter()
    try:
        ok = HANDLERS[cmd](ctx)
    except Exception as exc:  # report every failure as a structured artifact
        ctx.write_json("error.json", {"error": type(exc).__name__, "message": str(exc)})
        print(f"{cmd}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(f"{cmd}: {'ok' if ok else 'checks failed'} ({time.perf_counter() - t0:.1f} s) -> {ctx.dir}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="superhex", description="Subwavelength band structure of six-disk hexagonal crystals")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, default=None, help="TOML configuration file")
    p.add_argument("--out", type=Path, default=Path("out"), help="output root directory")
    p.add_argument("--threads", type=int, default=None, help="BLAS thread limit")
    p.add_argument("--sigma", type=float, default=None, help="override geometry.sigma")
    p.add_argument("--path", type=str, default=None, help='band path, e.g. "M1,G,M2:81"')
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        cfg = cfg.with_overrides(sigma=args.sigma, path=args.path)
    except ConfigError as exc:
        err = exc.to_dict()
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "config_error.json").write_text(json.dumps(err, indent=2) + "\n", encoding="utf-8")
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.threads:
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=args.threads):
            return run_command(args.command, cfg, args.out)
    return run_command(args.command, cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
