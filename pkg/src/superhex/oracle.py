"""Finite-difference energy oracle for the periodic capacitance matrix.

The harmonic functions ``u_j`` on the perforated cell with ``u_j = delta_jk`` on
disk ``k`` have Dirichlet energies ``int grad u_j . grad u_k = C_jk``.  The
energy is discretised on a rectangular periodic super cell
``[0, 1) x [0, sqrt 3)`` (two hexagonal cells) with the five-point stencil.
Edges cut by a circle connect the exterior node to the disk value at the
intersection point, contributing ``(u_a - g)^2 / theta`` where ``theta`` is the
cut fraction.  The resulting quadratic form is symmetric and annihilates
constants; its Schur complement onto the six disk values is the oracle.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .lattice import InclusionLayout


def _supercell_disks(layout: InclusionLayout):
    """Disk centres inside ``[0,1) x [0,sqrt 3)`` with their inclusion labels."""
    b = layout.basis
    a1 = b.l1 + b.l2  # (1, 0)
    a2 = b.l2 - b.l1  # (0, sqrt 3)
    out, labels = [], []
    for j, c in enumerate(layout.centers):
        for shift in (np.zeros(2), b.l2):
            p = c + shift
            # wrap into the rectangle
            p = np.array([p[0] % a1[0], p[1] % a2[1]])
            out.append(p)
            labels.append(j)
    return np.array(out), np.array(labels), (a1[0], a2[1])


def _cut_fraction(pa, pb, c, r, width, height):
    """Fraction along ``pa -> pb`` where the segment first enters the circle ``(c, r)``."""
    d = pb - pa
    # nearest periodic image of the centre
    rel = pa - c
    rel[0] -= width * round(rel[0] / width)
    rel[1] -= height * round(rel[1] / height)
    aa = d @ d
    bb = 2 * rel @ d
    cc = rel @ rel - r * r
    disc = bb * bb - 4 * aa * cc
    t = (-bb - math.sqrt(max(disc, 0.0))) / (2 * aa)
    return min(max(t, 1e-12), 1.0)


def energy_oracle(layout: InclusionLayout, h: float | None = None) -> np.ndarray:
    """Capacitance matrix from the discrete Dirichlet energy on a grid of spacing ~``h``.

    ``h`` defaults to ``radius / 12``; at least eight grid cells must span a radius.
    """
    r = layout.radius
    h = r / 12 if h is None else float(h)
    if r / h < 8:
        raise ValueError(f"grid spacing {h} too coarse: need radius/h >= 8")
    if layout.count != 6 or layout.variant != "full":
        raise ValueError("energy oracle is set up for the six-disk cell")
    centers, labels, (width, height) = _supercell_disks(layout)
    nx, ny = int(math.ceil(width / h)), int(math.ceil(height / h))
    hx, hy = width / nx, height / ny
    xs, ys = np.arange(nx) * hx, np.arange(ny) * hy
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])

    owner = np.full(len(pts), -1)
    for c, lab in zip(centers, labels):
        rel = pts - c
        rel[:, 0] -= width * np.round(rel[:, 0] / width)
        rel[:, 1] -= height * np.round(rel[:, 1] / height)
        owner[np.einsum("ij,ij->i", rel, rel) < r * r] = lab
    outside = owner < 0
    nout = int(outside.sum())
    index = np.full(len(pts), -1)
    index[outside] = np.arange(nout)
    nvar = nout + 6

    rows, cols, vals = [], [], []

    def add(i, j, w):
        rows.extend([i, j, i, j])
        cols.extend([i, j, j, i])
        vals.extend([w, w, -w, -w])

    ids = np.arange(len(pts)).reshape(nx, ny)
    for axis, w0 in ((0, hy / hx), (1, hx / hy)):
        nb = np.roll(ids, -1, axis=axis).ravel()
        for a, b in zip(ids.ravel(), nb):
            oa, ob = owner[a], owner[b]
            if oa < 0 and ob < 0:
                add(index[a], index[b], w0)
            elif oa >= 0 and ob >= 0:
                continue
            else:
                ext, inn = (a, b) if oa < 0 else (b, a)
                lab = owner[inn]
                pa = pts[ext].copy()
                pb = pa.copy()
                pb[axis] += hx if axis == 0 else hy
                if ext == b:
                    pb[axis] -= 2 * (hx if axis == 0 else hy)
                # pick the image of the owning disk closest to the exterior node
                cand = centers[labels == lab]
                rel = cand - pa
                rel[:, 0] -= width * np.round(rel[:, 0] / width)
                rel[:, 1] -= height * np.round(rel[:, 1] / height)
                c = pa + rel[np.argmin(np.einsum("ij,ij->i", rel, rel))]
                theta = _cut_fraction(pa, pb, c, r, width, height)
                add(index[ext], nout + lab, w0 / theta)

    q = sp.csr_matrix((vals, (rows, cols)), shape=(nvar, nvar))
    qoo = q[:nout, :nout].tocsc()
    qod = q[:nout, nout:].toarray()
    qdd = q[nout:, nout:].toarray()
    lu = spla.splu(qoo)
    schur = qdd - qod.T @ lu.solve(qod)
    # two hexagonal cells in the super cell
    c = 0.5 * schur
    return 0.5 * (c + c.T)
