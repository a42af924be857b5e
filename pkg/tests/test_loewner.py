import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sle_gff import domains as D
from sle_gff.errors import CapacityStall, HullTooLarge, ModulusExhausted, SelfIntersection
from sle_gff.loewner import (
    check_simple,
    DrivingPath,
    LoewnerState,
    driving_from_curve,
    evolve,
    local_capacity,
    polyline_hausdorff,
    trace_from_driving,
    vector_field,
    vector_field_dz,
)


hausdorff = polyline_hausdorff


def brownian_driving(kappa, T, dt, seed):
    rng = np.random.default_rng(seed)
    n = int(round(T / dt))
    x = np.concatenate([[0.0], np.cumsum(np.sqrt(kappa * dt) * rng.standard_normal(n))])
    return DrivingPath(np.linspace(0, T, n + 1), x + 0j)


def test_slit_solution_and_swallowing():
    dom = D.half_plane()
    drv = DrivingPath.constant(dom, 0.0, 1.0, 1e-3)
    st0 = LoewnerState.start(dom, 0.0, {"a": 1j, "b": 1 + 1j})
    s = evolve(st0, drv, 1e-3, 0.2)
    assert abs(s.tracked["a"] - np.sqrt(-1 + 0.8 + 0j)) < 1e-6
    s = evolve(st0, drv, 1e-3, 1.0)
    # i lies on the slit [0, 2i] and is swallowed at t = 1/4
    assert "a" in s.swallowed
    assert abs(s.tracked["b"] - np.sqrt((1 + 1j) ** 2 + 4)) < 1e-6


def test_hydrodynamic_normalization():
    dom = D.half_plane()
    z = 100 * np.exp(0.7j)
    s = evolve(LoewnerState.start(dom, 0.0, {"z": z}), DrivingPath.constant(dom, 0.0, 1.0, 1e-2), 1e-2, 1.0)
    assert abs(s.points[0] - z - 2 / z) < 1e-3


def test_annulus_inner_circle_modulus():
    dom = D.annulus(1.0)
    st0 = LoewnerState.start(dom, 1.0, {"in": np.exp(-1 + 2.0j), "mid": 0.6j})
    s = evolve(st0, DrivingPath.constant(dom, 1.0, 0.5, 1e-3), 1e-3, 0.5)
    assert abs(abs(s.tracked["in"]) - np.exp(-(1 - 0.5))) < 1e-6
    assert s.modulus_remaining == 0.5
    assert np.exp(-0.5) < abs(s.tracked["mid"]) < 1
    with pytest.raises(ModulusExhausted):
        evolve(st0, DrivingPath.constant(dom, 1.0, 1.0, 1e-3), 1e-3, 1.0)


def test_half_plane_imaginary_part_decreases():
    dom = D.half_plane()
    drv = brownian_driving(4.0, 0.2, 1e-3, 3)
    st0 = LoewnerState.start(dom, 0.0, {"z": 0.5 + 1j})
    prev = 1.0
    for T in np.arange(0.02, 0.2001, 0.02):
        st0 = evolve(st0, drv, 1e-3, T)
        im = st0.points[0].imag
        assert im <= prev + 1e-12
        prev = im


def test_strip_flow_fixes_ends():
    dom = D.strip()
    z = np.array([30 + 1.0j, -30 + 2.0j])
    s = evolve(LoewnerState.start(dom, 0.0, {"a": z[0], "b": z[1]}),
               DrivingPath.constant(dom, 0.0, 0.5, 1e-2), 1e-2, 0.5)
    assert np.max(np.abs(s.points.imag - z.imag)) < 1e-10


@pytest.mark.parametrize("kind", list(D.DomainKind))
def test_vector_field_derivative(kind):
    x = 1.0 if kind in (D.DomainKind.DISC, D.DomainKind.ANNULUS) else 0.0
    g = 0.3 + 0.5j
    m = 0.8 if kind is D.DomainKind.ANNULUS else None
    h = 1e-6
    fd = (vector_field(kind, x, g + h, m) - vector_field(kind, x, g - h, m)) / (2 * h)
    assert abs(fd - vector_field_dz(kind, x, g, m)) < 1e-7


def test_log_derivative_half_plane():
    dom = D.half_plane()
    z = 0.3 + 1.2j
    T = 0.3
    s = evolve(LoewnerState.start(dom, 0.0, {"z": z}), DrivingPath.constant(dom, 0.0, T, 1e-3), 1e-3, T,
               track_log_deriv=True)
    exact = np.log(z / np.sqrt(z * z + 4 * T))
    assert abs(s.log_deriv[0] - exact) < 1e-8


def test_cross_ratio_converges_under_refinement():
    dom = D.disc()
    pts = {"a": 0.3, "b": 0.5j, "c": -0.4 + 0.1j, "d": -0.2j}
    rng = np.random.default_rng(5)
    times = np.linspace(0, 0.3, 301)
    ang = np.concatenate([[0.0], np.cumsum(np.sqrt(2 * 1e-3) * rng.standard_normal(300))])
    drv = DrivingPath.from_lift(dom, times, ang)

    def cr(dt):
        s = evolve(LoewnerState.start(dom, 1.0, pts), drv, dt, 0.3)
        a, b, c, d = s.points
        return abs((a - b) * (c - d) / ((a - c) * (b - d)))

    c1, c2, c3 = cr(1e-3), cr(5e-4), cr(2.5e-4)
    assert abs(c2 - c3) < 1e-5
    assert abs(c2 - c3) <= abs(c1 - c2) + 1e-12


def test_trace_vertical_segment():
    dom = D.half_plane()
    tr = trace_from_driving(dom, DrivingPath.constant(dom, 0.0, 1.0, 1e-3))
    seg = np.linspace(0, 2, 2001) * 1j
    assert tr[0] == 0
    assert hausdorff(tr, seg) < 1e-4


def test_trace_disc_is_radial():
    dom = D.disc()
    tr = trace_from_driving(dom, DrivingPath.constant(dom, 1.0, 0.01, 1e-4))
    assert tr[0] == 1
    assert np.max(np.abs(tr.imag)) < 1e-8
    assert np.all(np.diff(tr.real) < 0)


@pytest.mark.slow
def test_chordal_traces_stay_in_closed_half_plane_and_simple():
    dom = D.half_plane()
    for seed in range(100):
        tr = trace_from_driving(dom, brownian_driving(4.0, 0.5, 1e-4, seed))
        assert np.all(tr.imag >= 0)
        # the polyline through the samples can zig-zag across itself within a
        # dozen samples where the step length jumps; chords further apart
        # must not cross
        check_simple(tr, min_gap=16)


def test_zipper_vertical_segment():
    drv = driving_from_curve(D.half_plane(), np.linspace(0, 2, 401) * 1j)
    assert drv.times[-1] == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(drv.values)) < 1e-10


@given(st.floats(0.1, 0.9))
@settings(max_examples=15, deadline=None)
def test_zipper_tilted_segment(alpha):
    # oracle: the straight line at angle pi*alpha has driving c sqrt(t)
    c = 2 * (1 - 2 * alpha) / np.sqrt(alpha * (1 - alpha))
    curve = np.linspace(0, 1, 2001) * np.exp(1j * np.pi * alpha)
    drv = driving_from_curve(D.half_plane(), curve)
    ratio = drv.values[-1].real / np.sqrt(drv.times[-1])
    assert ratio == pytest.approx(c, abs=2e-3 * max(1, abs(c)))


def test_zipper_round_trip_random_traces():
    dom = D.half_plane()
    for seed in range(50):
        tr = trace_from_driving(dom, brownian_driving(4.0, 0.05, 5e-4, 100 + seed))
        drv = driving_from_curve(dom, tr)
        back = trace_from_driving(dom, drv)
        diam = np.max(np.abs(tr - tr[0]))
        assert hausdorff(tr, back) < 1e-2 * diam


def test_zipper_errors():
    with pytest.raises(SelfIntersection):
        driving_from_curve(D.half_plane(), np.array([0, 1j, 1 + 1j, 1 + 0.5j, -1 + 0.5j]))
    with pytest.raises(CapacityStall):
        driving_from_curve(D.half_plane(), np.array([0, 1j, 0.5j]))


def test_driving_path_validation():
    with pytest.raises(ValueError):
        DrivingPath(np.array([0.0, 0.0]), np.array([0, 0]))
    with pytest.raises(ValueError):
        DrivingPath(np.array([0.0, 1.0]), np.array([1, 2]), circle=True)


def test_local_capacity_slit():
    t = 0.01
    slit = np.linspace(0, 1, 200) * 2j * np.sqrt(t)
    # half-plane capacity of [0, 2i sqrt(t)] is 2t in the normalization g = z + hcap/z
    assert local_capacity(D.half_plane(), slit, r=10 * 2 * np.sqrt(t)) == pytest.approx(2 * t, rel=0.02)
    assert local_capacity(D.half_plane(), np.array([0j]), r=1.0) == 0.0
    with pytest.raises(HullTooLarge):
        local_capacity(D.half_plane(), slit, r=0.1)
