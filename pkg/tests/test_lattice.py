import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sle_gff import domains as D
from sle_gff.lattice import FIXED, UNKNOWN, harmonic_solve, solve_rect

LAM = D.LAMBDA


def _jump(u):
    return -LAM * np.sign(u)


def test_zero_data_gives_zero():
    f = harmonic_solve(D.strip(), lambda u: np.zeros_like(u), 32)
    assert np.all(f.values == 0)
    f = harmonic_solve(D.annulus(1.0, D.Neumann()), lambda t: np.zeros_like(t), 32)
    assert np.all(f.values == 0)


def test_strip_dirichlet_top_matches_kernel_integration():
    # top value +lambda is the value the theta -> 1/2 mean takes on the top line
    f = harmonic_solve(D.strip(D.Dirichlet(LAM)), _jump, 128)
    assert f(1j * np.pi / 2) == pytest.approx(LAM / 2, abs=1e-3)
    w = 1 + 1j
    assert f(w) == pytest.approx((2 * LAM / np.pi) * np.angle(np.exp(w) - 1) - LAM, abs=1e-3)


def test_strip_zero_top_matches_harmonic_measure():
    def oracle(w):
        z = np.exp(w)
        # zeta = e^w sends (0,1), (1,inf) and (-inf,0) to the three boundary pieces
        return LAM * (np.angle(z - 1) - np.angle(z)) / np.pi - LAM * (1 - np.angle(z - 1) / np.pi)

    f = harmonic_solve(D.strip(D.Dirichlet(0.0)), _jump, 128)
    for w in (1j * np.pi / 2, -0.7 + 2.0j, 1.5 + 0.5j):
        assert f(w) == pytest.approx(oracle(w), abs=1e-3)


def test_annulus_radial_solution():
    # data 1 outside, 0 inside: 1 + log r / p
    p = 1.0
    f = harmonic_solve(D.annulus(p), lambda t: np.ones_like(t), 64)
    for z in (0.5, 0.7j, -0.9):
        assert f(z) == pytest.approx(1 + np.log(abs(z)) / p, abs=1e-10)
    g = harmonic_solve(D.annulus(p, D.Neumann()), lambda t: np.ones_like(t), 64)
    assert g(0.5) == pytest.approx(1.0, abs=1e-10)


def test_disc_mask():
    f = harmonic_solve(D.disc(), lambda t: np.cos(t), 128)
    # Re z is harmonic with data cos t
    assert f(0.3 + 0.2j) == pytest.approx(0.3, abs=2e-2)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=50, deadline=None)
def test_maximum_principle(seed):
    rng = np.random.default_rng(seed)
    na, nb = 20, 16
    kinds = np.full((na, nb), FIXED)
    kinds[1:-1, 1:-1] = UNKNOWN
    vals = rng.normal(size=(na, nb))
    vals[1:-1, 1:-1] = 0
    u = solve_rect(kinds, vals, 0.1, 0.13, sides=("dirichlet",) * 4)
    bd = vals[kinds == FIXED]
    inner = u[1:-1, 1:-1]
    assert inner.max() <= bd.max() + 1e-12
    assert inner.min() >= bd.min() - 1e-12


def test_grid_resolution_floor():
    with pytest.raises(ValueError):
        harmonic_solve(D.strip(), _jump, 16)
