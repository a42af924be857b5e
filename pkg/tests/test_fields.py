import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sle_gff.domains import LAMBDA, alpha_kappa, lambda_kappa
from sle_gff.errors import UnsupportedProfile
from sle_gff.fields import (
    BranchTracker,
    FieldModel,
    arc_integral,
    inverted_arc_integral,
    mean_kappa_rescale,
    strip_rh_potential,
    unwrap_to,
    winding_correction,
)
from sle_gff.kernels import InnerBC, green_half_plane, schwarz_annulus
from sle_gff.sle import DrivingModel

LAM = LAMBDA


def _model(variant, **kw):
    d = DrivingModel(variant, **kw)
    return d, FieldModel(d)


ANNULUS_CASES = [
    ("annulus-standard", dict(modulus=1.0)),
    ("annulus-neumann-rho", dict(modulus=1.0, rho=(0.8,), marked=(np.exp(2.0j),))),
    ("annulus-dirichlet", dict(modulus=1.5, mu_inner=0.3, marked=(np.exp(2.5j),))),
    ("annulus-inner", dict(modulus=1.0, marked=(np.exp(-1.0 + 2.0j),))),
]

ALL_CASES = [
    ("chordal", {}),
    ("chordal-rho", dict(rho=(0.7,), marked=(1.0,))),
    ("radial", {}),
    ("dipolar", {}),
    ("strip-theta", dict(theta=0.25)),
    ("strip-multi", dict(marked=(0.5 + np.pi * 1j,), top_levels=(0.2, -0.4))),
] + ANNULUS_CASES


def _interior(variant):
    if variant.startswith("annulus"):
        return np.array([0.7 * np.exp(1j), 0.6 * np.exp(-2.2j), 0.85 * np.exp(0.4j)])
    if variant == "radial":
        return np.array([0.3 + 0.2j, -0.4j, 0.5 - 0.1j])
    if variant in ("dipolar", "strip-theta", "strip-multi"):
        return np.array([0.3 + 1.0j, -1.0 + 2.0j, 2.0 + 0.5j])
    return np.array([0.5 + 1.0j, -1.0 + 0.7j, 2.0 + 2.0j])


# ------------------------------------------------------------------ examples


def test_chordal_mean_examples():
    d, f = _model("chordal")
    assert f.mean(1j, 0.0, ()) == pytest.approx(0.0, abs=1e-15)
    assert f.mean(np.exp(3j * np.pi / 4), 0.0, ()) == pytest.approx(LAM / 2, abs=1e-14)
    assert LAM / 2 == pytest.approx(0.3133, abs=1e-4)


def test_chordal_boundary_levels():
    _, f = _model("chordal")
    assert f.mean(-1 + 1e-9j, 0.0, ()) == pytest.approx(LAM, abs=1e-8)
    assert f.mean(1 + 1e-9j, 0.0, ()) == pytest.approx(-LAM, abs=1e-8)


def test_f_derivative_x_examples():
    _, f = _model("chordal")
    v = f.f_derivative_x(1j, 0.0, ())
    assert v == pytest.approx(2 * LAM / np.pi * 1j, abs=1e-14)
    assert v.imag == pytest.approx(0.3989, abs=1e-4)
    _, s = _model("strip-theta", theta=0.0)
    w = s.f_derivative_x(1j * np.pi / 2, 0.0, ())
    assert w == pytest.approx(2j * LAM / (np.pi * np.sqrt(2)), abs=1e-12)
    assert w.imag == pytest.approx(0.2821, abs=1e-4)


def test_alpha_and_lambda_kappa():
    assert alpha_kappa(8.0) == pytest.approx(-1 / (2 * np.sqrt(np.pi)), abs=1e-14)
    assert alpha_kappa(8.0) == pytest.approx(-0.28209, abs=1e-5)
    assert alpha_kappa(4.0) == 0.0
    assert lambda_kappa(4.0) == pytest.approx(LAM, abs=1e-15)


def test_radial_monodromy():
    # the -(lam/pi) log z piece loses 2 lam per counterclockwise loop
    _, f = _model("radial")
    assert f.monodromy() == pytest.approx(-2 * LAM, abs=1e-6)
    assert 2 * LAM == pytest.approx(1.2533, abs=1e-4)


@pytest.mark.parametrize("kappa", [2.0, 8.0])
def test_inner_dirichlet_monodromy(kappa):
    d = DrivingModel("dirichlet-general-kappa", kappa=kappa, base="annulus-inner", modulus=1.0,
                     marked=(np.exp(-1.0 + 2.0j),))
    f = FieldModel(d)
    assert f.monodromy() == pytest.approx((kappa - 6) * lambda_kappa(kappa), abs=1e-6)
    if kappa == 2.0:
        assert f.monodromy() == pytest.approx(-2 * np.sqrt(np.pi), abs=1e-6)


def test_outer_dirichlet_monodromy_is_winding_only():
    # the kappa = 4 mean with both marks outside is single valued
    for kappa in (2.0, 4.0, 8.0):
        d = DrivingModel("dirichlet-general-kappa", kappa=kappa, base="annulus-dirichlet",
                         modulus=1.0, marked=(np.exp(2.0j),), mu_inner=0.2)
        assert FieldModel(d).monodromy() == pytest.approx((kappa - 4) * lambda_kappa(kappa), abs=1e-6)


def test_kappa_rescale_identity_at_four():
    d = DrivingModel("annulus-dirichlet", modulus=1.0, marked=(np.exp(2.5j),), mu_inner=0.1)
    f4 = FieldModel(d)
    f = mean_kappa_rescale(d, 4.0)
    z = _interior("annulus-dirichlet")
    X, mk = 0.0, d.marked_lift()
    assert np.allclose(f.mean(z, X, mk), f4.mean(z, X, mk), atol=1e-14)
    assert np.allclose(f.covariance(z[0], z[1]), f4.covariance(z[0], z[1]), atol=1e-14)


def test_winding_correction_slit_example():
    # g'(z) = z / sqrt(z^2 + 4t) is real positive at z = i, t = 0.1
    d, f = _model("chordal", kappa=8.0)
    z, t = 1j, 0.1
    gp = z / np.sqrt(z**2 + 4 * t)
    assert winding_correction(f, np.sqrt(z**2 + 4 * t), np.log(gp)) == pytest.approx(0.0, abs=1e-15)
    _, f4 = _model("chordal")
    assert winding_correction(f4, 1j, 0.3 + 0.7j) == 0.0


def test_kappa_guard():
    d = DrivingModel("annulus-standard", modulus=1.0, kappa=3.0)
    with pytest.raises(UnsupportedProfile):
        FieldModel(d).mean(0.7, 0.0, ())


# ------------------------------------------------------- annulus identities


def test_annulus_dirichlet_x_derivative_is_poisson():
    p = 1.5
    d, f = _model("annulus-dirichlet", modulus=p, mu_inner=0.3, marked=(np.exp(2.5j),))
    z = _interior("annulus-dirichlet")
    X = 0.4
    got = f.f_derivative_x(z, X, d.marked_lift()).imag
    P = schwarz_annulus(p, InnerBC.DIRICHLET_CONST, np.exp(1j * X), z).real + np.log(np.abs(z)) / (2 * np.pi * p)
    assert np.max(np.abs(got - 2 * LAM * P)) < 1e-8
    # the reference vanishes on both circles away from x
    inner = np.exp(-p + 1j * np.linspace(0, 2 * np.pi, 16))
    Pi = schwarz_annulus(p, InnerBC.DIRICHLET_CONST, np.exp(1j * X), inner).real - 1 / (2 * np.pi)
    assert np.max(np.abs(Pi)) < 1e-10


def test_annulus_dirichlet_boundary_values():
    p, mu = 1.5, 0.3
    d, f = _model("annulus-dirichlet", modulus=p, mu_inner=mu, marked=(np.exp(2.5j),))
    th = np.linspace(0, 2 * np.pi, 12, endpoint=False)
    inner = np.exp(-p + 1e-9 + 1j * th)
    assert np.allclose(f.mean(inner, 0.0, d.marked_lift()), mu, atol=1e-6)
    out_a = (1 - 1e-9) * np.exp(1j * np.array([0.5, 1.5, 2.3]))
    out_b = (1 - 1e-9) * np.exp(1j * np.array([3.0, 4.5, 6.0]))
    va, vb = f.mean(out_a, 0.0, d.marked_lift()), f.mean(out_b, 0.0, d.marked_lift())
    assert np.allclose(np.abs(va - vb), 2 * LAM, atol=1e-6)


def test_annulus_inner_jump_values():
    p = 1.0
    d, f = _model("annulus-inner", modulus=p, marked=(np.exp(-p + 2.0j),))
    mk = d.marked_lift()
    inner_a = np.exp(-p + 1e-9 + 1j * np.array([1.0, 1.5]))
    inner_b = np.exp(-p + 1e-9 + 1j * np.array([2.5, 3.0]))
    va, vb = f.mean(inner_a, 0.0, mk), f.mean(inner_b, 0.0, mk)
    assert np.ptp(va) < 1e-6 and np.ptp(vb) < 1e-6
    assert abs(abs(va[0] - vb[0]) - 2 * LAM) < 1e-6


@pytest.mark.parametrize("variant,kw", ANNULUS_CASES)
def test_arc_integrals_sum_to_full_circle(variant, kw):
    m = kw["modulus"]
    z = 0.6 * np.exp(0.3j)
    a = arc_integral(m, 0.0, 2.0, z) + arc_integral(m, 2.0, 2 * np.pi, z)
    full = arc_integral(m, 0.0, 2 * np.pi, z)
    assert a == pytest.approx(full, abs=1e-12)
    assert np.isfinite(inverted_arc_integral(m, 1.0, z))


# --------------------------------------------------------- generic properties


def _stencil(fun, z, h=1e-3):
    return fun(z + h) + fun(z - h) + fun(z + 1j * h) + fun(z - 1j * h) - 4 * fun(z)


@pytest.mark.parametrize("variant,kw", ALL_CASES)
def test_mean_is_harmonic(variant, kw):
    d, f = _model(variant, **kw)
    X0 = np.angle(d.start) if d.circle else d.start.real
    mk = d.marked_lift()
    z = _interior(variant)
    lap = _stencil(lambda w: f.mean(w, X0, mk), z)
    assert np.max(np.abs(lap)) < 1e-6


@pytest.mark.parametrize("variant,kw", ALL_CASES)
def test_x_derivative_matches_finite_difference(variant, kw):
    d, f = _model(variant, **kw)
    X0 = np.angle(d.start) if d.circle else d.start.real
    mk = d.marked_lift()
    z = _interior(variant)
    h = 1e-6
    fd = (f.mean(z, X0 + h, mk) - f.mean(z, X0 - h, mk)) / (2 * h)
    assert np.max(np.abs(fd - f.f_derivative_x(z, X0, mk).imag)) < 1e-5


@pytest.mark.parametrize("variant,kw", ALL_CASES)
def test_z_derivative_matches_finite_difference(variant, kw):
    d, f = _model(variant, **kw)
    X0 = np.angle(d.start) if d.circle else d.start.real
    mk = d.marked_lift()
    z = _interior(variant)
    h = 1e-6
    fd = (f.potential(z + h, X0, mk) - f.potential(z - h, X0, mk)) / (2 * h)
    assert np.max(np.abs(fd - f.f_derivative_z(z, X0, mk))) < 1e-6


def test_strip_rh_boundary_and_derivative():
    theta = 0.2
    w = np.array([-2.0, -0.5, 0.5, 2.0]) + 1e-10j
    vals = strip_rh_potential(theta, w).imag
    assert np.allclose(vals, [LAM, LAM, -LAM, -LAM], atol=1e-6)
    z, h = 0.4 + 1.3j, 1e-6
    fd = (strip_rh_potential(theta, z + h) - strip_rh_potential(theta, z - h)) / (2 * h)
    assert fd == pytest.approx(LAM / np.pi * np.exp(theta * z) / np.sinh(z / 2), abs=1e-7)


def test_strip_theta_zero_closed_form():
    w = np.array([0.3 + 1.0j, -1.0 + 2.0j])
    closed = -2 * LAM / np.pi * np.log((1 + np.exp(w / 2)) / (1 - np.exp(w / 2))) + 1j * LAM
    assert np.allclose(strip_rh_potential(0.0, w), closed, atol=1e-12)


@given(st.floats(-1.5, 1.5), st.floats(0.2, 2.0), st.floats(-1.0, 1.0))
@settings(max_examples=40, deadline=None)
def test_chordal_covariance_decreases_under_slit(x, y, t_frac):
    # pulling back through g_t lowers the Dirichlet Green's function
    _, f = _model("chordal")
    z1, z2 = complex(x, y), complex(-x / 2, 2 * y)
    t = 0.01 * (1.5 + t_frac)
    g = np.sqrt(np.array([z1, z2]) ** 2 + 4 * t)
    g = np.where(g.imag < 0, -g, g)
    assert f.covariance(g[0], g[1], t) <= f.covariance(z1, z2) + 1e-15


def test_covariance_at_time_zero_is_green():
    _, f = _model("chordal")
    assert f.covariance(1j, 2j) == pytest.approx(green_half_plane(1j, 2j), abs=1e-15)
    assert green_half_plane(1j, 2j) == pytest.approx(np.log(3) / (2 * np.pi), abs=1e-14)


@given(st.floats(-20, 20), st.floats(-20, 20), st.floats(0.5, 10))
def test_unwrap_to_is_nearest_representative(v, ref, period):
    u = unwrap_to(v, ref, period)
    assert abs(u - ref) <= period / 2 + 1e-9
    k = (u - v) / period
    assert abs(k - round(k)) < 1e-9


def test_branch_tracker_follows_radial_loop():
    # carry a point once around the origin counterclockwise: the tracked mean drops by 2 lam
    d, f = _model("radial")
    tr = BranchTracker(f, np.array([0.5 + 0j]), 1)
    th = np.linspace(0, 2 * np.pi, 200)
    for t in th:
        g = np.array([[0.5 * np.exp(1j * t)]])
        tr.update(np.array([0]), 0.0, np.array([0.0]), g, np.zeros_like(g), np.zeros((1, 0)))
    gained = tr.result()[0, 0] - f.mean(0.5, 0.0, ())
    assert float(np.real(gained)) == pytest.approx(f.monodromy(), abs=1e-9)
