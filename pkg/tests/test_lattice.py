import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from superhex.lattice import (INVERSION, MAX_RADIUS, ROTATION, GeometryError, build_inclusions, build_lattice,
                              high_symmetry_points, min_image_distance, same_point_set, sublattice)

SQ3 = np.sqrt(3.0)


def test_basis_vectors_and_area(basis):
    np.testing.assert_allclose(basis.l1, [0.5, -SQ3 / 2])
    np.testing.assert_allclose(basis.l2, [0.5, SQ3 / 2])
    np.testing.assert_allclose(basis.k1, [2 * np.pi, -2 * np.pi / SQ3])
    np.testing.assert_allclose(basis.k2, [2 * np.pi, 2 * np.pi / SQ3])
    assert basis.cell_area == pytest.approx(SQ3 / 2, rel=1e-15)


def test_duality(basis):
    assert basis.duality_residual() < 1e-14


def test_sublattice_is_finer_and_dual(basis):
    sub = sublattice(basis)
    assert sub.duality_residual() < 1e-13
    assert sub.cell_area == pytest.approx(basis.cell_area / 3)
    # every coarse lattice vector is a fine one: integer coordinates
    for v in (basis.l1, basis.l2):
        f = sub.fractional(v)
        np.testing.assert_allclose(f, np.rint(f), atol=1e-12)
    # every fine dual vector is a coarse dual vector
    for k in (sub.k1, sub.k2):
        f = k @ np.linalg.inv(basis.dual)
        np.testing.assert_allclose(f, np.rint(f), atol=1e-12)


def test_high_symmetry_points(basis):
    p = high_symmetry_points(basis)
    assert set(p) == {"G", "alpha1", "alpha2", "M1", "M2"}
    np.testing.assert_allclose(p["M1"], -p["M2"])
    # alpha1 and alpha2 are inversion partners modulo the fine dual lattice, but not equivalent
    inv = np.linalg.inv(sublattice(basis).dual)
    f = (p["alpha1"] + p["alpha2"]) @ inv
    np.testing.assert_allclose(f, np.rint(f), atol=1e-12)
    g = (p["alpha1"] - p["alpha2"]) @ inv
    assert np.max(np.abs(g - np.rint(g))) > 0.3


@pytest.mark.parametrize("sigma", [-0.1, 0.0, 0.1])
def test_centres_follow_rotation(sigma, basis):
    lay = build_inclusions(0.086, sigma)
    first = -(1 + sigma) * basis.l1 / 3
    np.testing.assert_allclose(lay.centers[0], first, atol=1e-15)
    for j in range(5):
        np.testing.assert_allclose(lay.centers[j + 1], ROTATION @ lay.centers[j], atol=1e-15)
    np.testing.assert_allclose(np.linalg.norm(lay.centers, axis=1), (1 + sigma) / 3, rtol=1e-14)


def test_layout_symmetric_under_inversion_and_rotation(layout0, basis):
    c = layout0.centers
    assert same_point_set(c @ ROTATION.T, c, basis)
    assert same_point_set(c @ INVERSION.T, c, basis)
    np.testing.assert_allclose(c[3], -c[0], atol=1e-15)


def test_super_honeycomb_translation_invariance(layout0, basis):
    sub = sublattice(basis)
    c = layout0.centers
    for a, b in ((0, 2), (2, 4), (1, 3), (3, 5)):
        f = sub.fractional(c[b] - c[a])
        np.testing.assert_allclose(f, np.rint(f), atol=1e-12)


def test_deformed_layout_breaks_translation_invariance(basis):
    c = build_inclusions(0.086, 0.1).centers
    sub = sublattice(basis)
    f = sub.fractional(c[2] - c[0])
    assert np.max(np.abs(f - np.rint(f))) > 1e-3


def test_labels():
    assert build_inclusions(0.05, -0.1).label == "contracted"
    assert build_inclusions(0.05, 0.1).label == "dilated"
    assert build_inclusions(0.05, 0.0).label == "super-honeycomb"


@pytest.mark.parametrize("radius,sigma", [(0.0, 0.0), (-0.1, 0.0), (MAX_RADIUS, 0.0), (0.1, -0.7)])
def test_invalid_geometry(radius, sigma):
    with pytest.raises(GeometryError):
        build_inclusions(radius, sigma)


def test_subcell_needs_super_honeycomb():
    with pytest.raises(GeometryError):
        build_inclusions(0.05, 0.1).subcell()


@settings(max_examples=60, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3),
       st.integers(-4, 4), st.integers(-4, 4))
def test_min_image_distance_lattice_invariant(px, py, qx, qy, n1, n2):
    b = build_lattice()
    p, q = np.array([px, py]), np.array([qx, qy])
    d0 = min_image_distance(p, q, b)
    d1 = min_image_distance(p + b.points(n1, n2), q, b)
    assert d0 == pytest.approx(d1, abs=1e-12)
    assert d0 <= np.linalg.norm(p - q) + 1e-12
    # never longer than the circumradius of the hexagonal cell
    assert d0 <= 1 / SQ3 + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 0.12), st.floats(-0.3, 0.3))
def test_admissible_layouts_are_rotation_invariant(radius, sigma):
    try:
        lay = build_inclusions(radius, sigma)
    except GeometryError:
        return
    assert same_point_set(lay.centers @ ROTATION.T, lay.centers, lay.basis)
    for i in range(6):
        for j in range(i + 1, 6):
            assert min_image_distance(lay.centers[i], lay.centers[j], lay.basis) > 2 * radius
