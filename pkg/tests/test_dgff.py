import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sle_gff.dgff import (
    GffLattice,
    _grid_edges,
    chordal_box,
    coupling_test,
    estimate_kappa,
    lattice_calibration,
    level_line,
    level_line_curves,
    sample_dgff,
    truncate_curve,
)
from sle_gff.domains import LAMBDA
from sle_gff.errors import NoInterface, UnsupportedProfile
from sle_gff.lattice import FIXED, UNKNOWN


def _box(n, value=0.0):
    kinds = np.full((n, n), FIXED)
    kinds[1:-1, 1:-1] = UNKNOWN
    vals = np.where(kinds == FIXED, value, 0.0).astype(float)
    return GffLattice(kinds, vals, 1.0, 0j, _grid_edges(n, n))


def test_single_node_variance():
    lat = _box(3)
    assert lat.green(1 + 1j)[1, 1] == pytest.approx(0.25, abs=1e-14)
    u = sample_dgff(lat, seed=1, n=20000)
    assert np.all(u[:, 0, :] == 0)
    assert u[:, 1, 1].var() == pytest.approx(0.25, rel=0.03)


def test_constant_boundary_mean():
    lat = _box(9, value=0.7)
    assert np.allclose(lat.harmonic_mean(), 0.7, atol=1e-12)


def test_sample_statistics_match_mean_and_green():
    lat = chordal_box(16, 2.0)
    u = sample_dgff(lat, seed=3, n=20000)
    m = lat.harmonic_mean()
    z1, z2 = 0.5 + 1j, -0.5 + 1.5j
    a, b = lat.value_at(u, z1)[:, 0], lat.value_at(u, z2)[:, 0]
    assert a.mean() == pytest.approx(lat.value_at(m, z1)[0], abs=4 * a.std() / np.sqrt(len(a)))
    g = lat.value_at(lat.green(z1), z2)[0]
    assert np.cov(a, b)[0, 1] == pytest.approx(g, abs=0.02)


def test_sampling_is_reproducible():
    lat = chordal_box(16, 2.0)
    assert np.array_equal(sample_dgff(lat, 5, 3), sample_dgff(lat, 5, 3))


def test_box_mean_tracks_continuum():
    lat = chordal_box(64, 4.0)
    m = lat.harmonic_mean()
    for z in (1j, 1 + 1j, -1 + 0.5j):
        cont = 2 * LAMBDA / np.pi * np.angle(z) - LAMBDA
        assert lat.value_at(m, z)[0] == pytest.approx(cont, abs=0.02)


def test_calibration_near_one():
    # the residual deficit comes from the finite box
    assert lattice_calibration(64, 16.0) == pytest.approx(1.0, abs=0.05)


def test_slit_imposes_jump():
    lat = chordal_box(32, 2.0)
    h = lat.h
    # the slit runs between the columns x = 0 and x = h
    slit = lat.with_slit(0.5 * h + np.linspace(0, 1.5, 50) * 1j, LAMBDA)
    m = slit.harmonic_mean()
    left, right = lat.value_at(m, [1.0j, h + 1.0j])
    assert left == pytest.approx(LAMBDA, rel=0.1) and right == pytest.approx(-LAMBDA, rel=0.1)
    # the unslit lattice is left untouched
    assert np.allclose(lat.harmonic_mean(), chordal_box(32, 2.0).harmonic_mean())


# ------------------------------------------------------------- level lines


def test_level_line_on_deterministic_field():
    n = 21
    x = np.arange(n) - 10
    u = -np.repeat(x[:, None], n, axis=1).astype(float) + 0.5
    c = level_line(u)
    # u > 0 for x <= 0: the interface runs up between the columns x = 0 and x = 1
    assert np.all(np.abs(c.real - 10.5) <= 0.5)
    assert c[0].imag == 0 and c[-1].imag == pytest.approx(n - 1)


def test_level_line_requires_sign_change():
    with pytest.raises(NoInterface):
        level_line(np.ones((5, 5)))


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=10, deadline=None)
def test_level_line_separates_signs(seed):
    lat = chordal_box(16, 2.0)
    u = sample_dgff(lat, seed)[0]
    c = level_line(u, lat.h, lat.origin, start=0j)
    w = (c - lat.origin) / lat.h
    # every point is the midpoint of a +/- edge
    assert np.allclose(2 * w, np.rint(2 * w))
    assert abs(c[0]) < lat.h
    assert len(c) == len(set(np.round(c, 9)))


def test_truncate_curve():
    c = np.linspace(0, 3, 31) * 1j
    assert np.abs(truncate_curve(c, 1.0)).max() < 1.0
    assert len(truncate_curve(c, 10.0)) == len(c)


def test_estimate_kappa_straight_slit():
    curves = [np.linspace(0, 1, 200) * 1j for _ in range(5)]
    k, d = estimate_kappa(curves)
    assert abs(k.estimate) < 1e-12 and abs(d.estimate) < 1e-12


def test_level_lines_deterministic():
    a = level_line_curves(3, resolution=32, seed=9)
    b = level_line_curves(3, resolution=32, seed=9)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


# -------------------------------------------------------------- coupling


def test_coupling_small():
    reports = coupling_test(resolution=32, n=150, seed=2, dt=5e-3, half_width=4.0)
    assert len(reports) == 8
    assert all(abs(r.z_score) < 4 for r in reports)


def test_coupling_variant_guard():
    with pytest.raises(UnsupportedProfile):
        coupling_test(variant="radial", n=2)
