import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from superhex.capacitance import eigen, periodic_capacitance
from superhex.fields import (EVEN_SPAN, ODD_SPAN, DegenerateGapError, FieldGrid, GridSpec, eigenvector_span_check,
                             inclusion_owner, parity_classify, rotate_vector, rotated_points,
                             synthesize_eigenfunction)
from superhex.lattice import INVERSION, build_inclusions
from superhex.mesh import discretize
from superhex.operators import potential_matrix


def _inversion_perm(v):
    # inversion sends D_j to D_{j+3}
    return np.roll(np.asarray(v), 3, axis=0)


def test_reference_spans_have_definite_parity():
    for v in ODD_SPAN:
        np.testing.assert_array_equal(_inversion_perm(v), -v)
    for v in EVEN_SPAN:
        np.testing.assert_array_equal(_inversion_perm(v), v)
    # both spans are orthogonal to the constant vector and to each other
    assert np.allclose(ODD_SPAN @ np.ones(6), 0) and np.allclose(EVEN_SPAN @ np.ones(6), 0)
    assert np.allclose(ODD_SPAN @ EVEN_SPAN.T, 0)


@settings(max_examples=40)
@given(st.lists(st.floats(-1, 1), min_size=25, max_size=25))
def test_parity_classify_projections(vals):
    a = np.array(vals).reshape(5, 5)
    even = a + a[::-1, ::-1]
    odd = a - a[::-1, ::-1]
    if np.linalg.norm(even) > 1e-6:
        assert parity_classify(even).verdict == "even"
    if np.linalg.norm(odd) > 1e-6:
        assert parity_classify(odd).verdict == "odd"
    r = parity_classify(a)
    assert r.even**2 + r.odd**2 == pytest.approx(1.0) or np.linalg.norm(a) == 0


def test_inclusion_owner(layout0):
    c = layout0.centers
    pts = np.vstack([c, c + layout0.basis.l1, [[0.0, 0.0]], c[0] + [layout0.radius * 1.01, 0]])
    own = inclusion_owner(pts, layout0)
    np.testing.assert_array_equal(own, [0, 1, 2, 3, 4, 5, 0, 1, 2, 3, 4, 5, -1, -1])


def test_rotation_relabelling(layout0, cap32, mesh32):
    # w_{Pv}(R x) = w_v(x)
    v = np.array([0.3, -1.0, 0.2, 0.5, 0.1, -0.1])
    x = np.array([[0.05, 0.21], [0.4, -0.1], [-0.22, 0.03]])
    dens = cap32.densities
    w = potential_matrix(mesh32, x) @ dens @ v
    w_rot = potential_matrix(mesh32, rotated_points(x)) @ dens @ rotate_vector(v)
    np.testing.assert_allclose(w_rot, w, atol=1e-10)


def test_constant_vector_gives_zero_field(cap32, mesh32):
    f = synthesize_eigenfunction(np.ones(6), cap32, mesh32, GridSpec(n=11))
    assert np.max(np.abs(f.values)) < 1e-9


@pytest.mark.parametrize("sigma,lower", [(-0.1, "odd"), (0.1, "even")])
def test_band_parity(sigma, lower):
    mesh = discretize(build_inclusions(0.086, sigma), 32)
    cap = periodic_capacitance(mesh)
    eig = eigen(cap)
    for b in (1, 2):
        f = synthesize_eigenfunction(eig.vectors[:, b], cap, mesh, GridSpec(n=41))
        rep = parity_classify(f)
        assert rep.verdict == lower
        assert max(rep.even, rep.odd) >= 0.99
    span = eigenvector_span_check(eig, sigma)
    assert span.lower_reference == lower
    assert span.lower_band_angle < 1e-6 and span.upper_band_angle < 1e-6


def test_field_inside_inclusions_is_constant(cap32, mesh32):
    v = eigen(cap32).vectors[:, 2]
    f = synthesize_eigenfunction(v, cap32, mesh32, GridSpec(n=41))
    for j in range(6):
        vals = f.values[f.mask == j]
        assert len(vals) > 0
        assert np.ptp(np.real(vals)) < 1e-12


def test_inversion_of_grid_points(cap32, mesh32):
    # an odd weight vector gives a field odd under x -> -x
    v = ODD_SPAN[0]
    x = np.array([[0.05, 0.21], [0.4, -0.1]])
    dens = cap32.densities
    w = potential_matrix(mesh32, x) @ dens @ v
    w_inv = potential_matrix(mesh32, x @ INVERSION.T) @ dens @ v
    np.testing.assert_allclose(w_inv, -w, atol=1e-10)


def test_degenerate_gap_rejected(cap32):
    with pytest.raises(DegenerateGapError):
        eigenvector_span_check(eigen(cap32), 0.0)


def test_field_csv(cap32, mesh32):
    f = synthesize_eigenfunction(eigen(cap32).vectors[:, 1], cap32, mesh32, GridSpec(n=5))
    assert isinstance(f, FieldGrid)
    lines = f.to_csv({"band": 2}).splitlines()
    assert lines[0] == "# band: 2"
    assert lines[1] == "x,y,re,im,mask"
    assert len(lines) == 2 + 25


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(n=1)
    with pytest.raises(ValueError):
        GridSpec(half_width=0.0)
