"""Checks of the coupling: drift residuals, Hadamard's formula, Monte Carlo
martingale tests, a commutation functional and local capacity rates."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .domains import DomainKind, DomainSpec, alpha_kappa, half_plane, strip, Neumann
from .errors import DegenerateStopping, FDStepInvalid
from .fields import (
    FieldModel,
    strip_history_rate,
    tracked_covariance,
    tracked_mean,
    tracker_factory,
)
from .kernels import green_strip_neumann_top, schwarz_strip
from .lattice import FIXED, OUTSIDE, UNKNOWN, solve_rect
from .loewner import (
    DrivingPath,
    LoewnerState,
    evolve,
    local_capacity,
    trace_from_driving,
    vector_field,
    vector_field_dz,
)
from .sle import DrivingModel, simulate

FD_STEP = 1e-5
RESIDUAL_FLOOR = 1e-6  # residuals below this count as zero in the boundedness protocol
EPS_LADDER = np.logspace(-2, -4, 9)


# ------------------------------------------------------------------ reports


@dataclass
class McReport:
    check: str
    estimate: float
    target: float
    std_error: float
    n_paths: int
    params: dict = field(default_factory=dict)
    tolerance: float | None = None  # absolute acceptance band instead of |z| <= 3

    @property
    def z_score(self) -> float:
        return (self.estimate - self.target) / self.std_error

    @property
    def passed(self) -> bool:
        if self.tolerance is not None:
            return abs(self.estimate - self.target) <= self.tolerance
        return abs(self.z_score) <= 3

    def to_json(self) -> dict:
        return {"check": self.check, "params": dict(self.params, n_paths=self.n_paths),
                "estimate": self.estimate, "target": self.target, "std_error": self.std_error,
                "z_score": self.z_score, "pass": self.passed}


def report_from_samples(check, samples, target, params=None) -> McReport:
    samples = np.asarray(samples, dtype=float)
    n = len(samples)
    se = float(np.std(samples, ddof=1) / np.sqrt(n))
    return McReport(check, float(np.mean(samples)), float(target), max(se, 1e-300), n, params or {})


# ------------------------------------------------------------ drift residual


def _boundary_point(field: FieldModel, X):
    return np.exp(1j * X) if field.driving.circle else X


def drift_residual(field: FieldModel, driving: DrivingModel, z, X, mk=(), t=0.0, drift=None,
                   with_correction=False, fd_step=FD_STEP):
    """Im{(kappa/2) F_xx + V_x(z) F_z + F_t + D F_x + sum_j v_j F_{x_j}} for the field's F.

    kappa is the driving's; F is the field's potential (scaled to the field's
    kappa).  D defaults to the driving's drift.  Derivatives in x and z are
    analytic; those in t and in the marked points are central differences of
    step ``fd_step``.  ``with_correction`` adds the kappa != 4 winding term.
    """
    z = np.asarray(z, dtype=complex)
    X = float(X)
    mk = np.asarray(mk, dtype=float)
    x = _boundary_point(field, X)
    if np.any(np.abs(z - x) < 10 * fd_step * (1 - 1e-9)):
        raise FDStepInvalid("test point within 10 FD steps of the driving point")
    kind = field.domain.kind
    m = field.modulus_left(t)
    s = field.scale
    kappa = driving.kappa
    D = driving.drift(np.array(X), mk, t) if drift is None else drift
    V = vector_field(kind, x, z, m)
    res = (kappa / 2) * field.f_derivative_xx(z, X, mk, t) + V * field.f_derivative_z(z, X, mk, t) \
        + D * field.f_derivative_x(z, X, mk, t)
    res = s * res.imag
    per = field.periods()

    def fd(shift):
        a = field.potential_pieces(z, *shift(+fd_step))
        b = field.potential_pieces(z, *shift(-fd_step))
        d = a - b
        for k, P in enumerate(per):
            if P is not None:
                d[..., k] -= P * np.round(d[..., k] / P)
        return s * d.sum(axis=-1) / (2 * fd_step)

    if m is not None:
        res = res + fd(lambda h: (X, mk, t + h))
    if len(mk):
        vel = driving.marked_velocity(np.array(X), mk, t)
        for j in range(len(mk)):
            def shift(h, j=j):
                mm = mk.copy()
                mm[j] += h
                return X, mm, t
            res = res + vel[j] * fd(shift)
    if with_correction and kappa != 4.0:
        a = alpha_kappa(kappa)
        if kind is DomainKind.STRIP:
            res = res + strip_history_rate(field, X, z).imag
        else:
            dV = vector_field_dz(kind, x, z, m)
            corr = dV if kind is not DomainKind.ANNULUS else dV - V / z
            res = res + a * corr.imag
    return res


def approach_points(field: FieldModel, X, eps, phi=np.pi / 3):
    """Interior points at distance ~eps from the driving point along angle phi."""
    eps = np.asarray(eps, dtype=float)
    d = eps * np.exp(1j * phi)
    if field.driving.circle:
        # tangent direction i x rotated by phi into the disc
        x = np.exp(1j * X)
        return x * (1 + 1j * d)
    return X + d


@dataclass
class SingularityProfile:
    eps: np.ndarray
    residual: np.ndarray
    slope: float
    bounded: bool
    divergent: bool


def singularity_profile(field, driving, X, mk=(), t=0.0, drift=None, eps=EPS_LADDER,
                        phi=np.pi / 3) -> SingularityProfile:
    """Residual along z = x + eps e^{i phi}: bounded (variation < 2x, floor
    RESIDUAL_FLOOR) or divergent (log-log slope <= -0.9)."""
    z = approach_points(field, X, eps, phi)
    r = np.abs(np.asarray(drift_residual(field, driving, z, X, mk, t, drift)))
    bounded = bool(np.max(r) < 2 * max(np.min(r), RESIDUAL_FLOOR))
    ok = r > RESIDUAL_FLOOR
    slope = float(np.polyfit(np.log(eps[ok]), np.log(r[ok]), 1)[0]) if ok.sum() >= 3 else 0.0
    return SingularityProfile(np.asarray(eps), r, slope, bounded, slope <= -0.9)


# ------------------------------------------------------------------ Hadamard


def slit_map_half_plane(z, x, t):
    """g_t for the vertical slit at x: x + sqrt((z - x)^2 + 4t), upper branch."""
    w = np.sqrt((np.asarray(z, dtype=complex) - x) ** 2 + 4 * t)
    return x + np.where(w.imag < 0, -w, w)


def greens_lattice_oracle(kinds, h, origin, z1, z2, neumann="mirror"):
    """Discrete Green's function -Lap_h G = delta_{z1} (delta = 1/h^2 at the node nearest z1).

    kinds: node classes (UNKNOWN interior, FIXED zero Dirichlet, OUTSIDE
    reflecting).  The grid has node (i, j) at origin + i h + 1j j h.  Out of
    range neighbours are mirrored (``neumann="mirror"``) or dropped
    (``"reflect"``, symmetric matrix).  Returns G at z2, bicubic-interpolated
    off the nodes, and the solution grid.  A sequence of sources z1 returns
    one grid per source (sharing a factorization) and z2 is then ignored.
    """
    kinds = np.asarray(kinds)
    na, nb = kinds.shape
    many = np.ndim(z1) > 0
    sources = np.atleast_1d(np.asarray(z1, dtype=complex))
    src = np.zeros((na, nb, len(sources)))
    for k, s in enumerate(sources):
        i1 = int(round((s - origin).real / h))
        j1 = int(round((s - origin).imag / h))
        if not (0 <= i1 < na and 0 <= j1 < nb) or kinds[i1, j1] != UNKNOWN:
            raise ValueError("z1 must be an interior lattice node")
        src[i1, j1, k] = 1.0 / h**2
    sides = ("neumann",) * 4 if neumann == "mirror" else ("drop",) * 4
    u = solve_rect(kinds, np.zeros((na, nb)), h, h, sides=sides, source=src)
    if many:
        return None, [u[:, :, k] for k in range(len(sources))]
    u = u[:, :, 0]
    return _interp(u, h, origin, z2), u


def _interp(u, h, origin, z):
    na, nb = u.shape
    a = origin.real + h * np.arange(na)
    b = origin.imag + h * np.arange(nb)
    z = np.asarray(z, dtype=complex)
    on = np.isclose((z - origin).real / h, np.round((z - origin).real / h)) & \
        np.isclose((z - origin).imag / h, np.round((z - origin).imag / h))
    if np.all(on):
        return u[np.round((z - origin).real / h).astype(int), np.round((z - origin).imag / h).astype(int)]
    spl = RectBivariateSpline(a, b, u, kx=3, ky=3)
    return spl.ev(z.real, z.imag)


def hadamard_reference(domain: DomainSpec, x, z1, z2, theta=0.0):
    """-2 pi P_x(z1) P_x(z2) with the domain's Poisson kernel."""
    from .kernels import KernelHandle, poisson_eval
    h = KernelHandle(domain)
    return -2 * np.pi * poisson_eval(h, x, z1) * poisson_eval(h, x, z2)


def hadamard_fd_check(domain: DomainSpec, x, z1, z2, t_small=1e-4, lattice_resolution=None):
    """(fd_derivative, reference) for growth at x during time t_small.

    Half-plane: explicit slit map and closed-form Green's function.  Strip
    with Neumann top: the Green's function comes from the lattice oracle
    (resolution ``lattice_resolution`` across the strip) or the closed form
    when no resolution is given; g_t by the Loewner flow.
    """
    if not 1e-6 <= t_small <= 1e-3:
        raise FDStepInvalid("t_small outside [1e-6, 1e-3]")
    z1, z2 = complex(z1), complex(z2)
    kind = domain.kind
    ref = float(hadamard_reference(domain, x, z1, z2))
    if kind is DomainKind.HALF_PLANE:
        from .kernels import green_half_plane
        g1, g2 = slit_map_half_plane([z1, z2], x, t_small)
        fd = (green_half_plane(g1, g2) - green_half_plane(z1, z2)) / t_small
        return float(fd), ref
    if kind is DomainKind.STRIP and isinstance(domain.secondary, Neumann):
        st = evolve(LoewnerState.start(domain, x, {"a": z1, "b": z2}),
                    DrivingPath.constant(domain, x, t_small, t_small / 20), t_small / 20, t_small)
        g1, g2 = st.points
        if lattice_resolution is None:
            fd = (green_strip_neumann_top(g1, g2) - green_strip_neumann_top(z1, z2)) / t_small
            return float(fd), ref
        return float(_strip_lattice_fd(z1, z2, g1, g2, t_small, lattice_resolution)), ref
    raise FDStepInvalid(f"no Hadamard oracle for {kind.value}")


def _strip_lattice_fd(z1, z2, g1, g2, t, n, half_width=3 * np.pi):
    """First-order FD of G(g1, g2) - G(z1, z2) with lattice Green's functions sourced at z1 and z2.

    G(g1, g2) - G(z1, z2) = [G(z1, g2) - G(z1, z2)] + [G(z2, g1) - G(z2, z1)] + O(t^2).
    The source points are snapped to nodes, the moving points read off a bicubic spline.
    """
    h = np.pi / n
    na = int(round(2 * half_width / h)) + 1
    origin = complex(-half_width, 0.0)
    kinds = np.full((na, n + 1), UNKNOWN)
    kinds[:, 0] = FIXED
    kinds[0, :] = FIXED
    kinds[-1, :] = FIXED

    def snap(z):
        return origin + h * round((z - origin).real / h) + 1j * h * round((z - origin).imag / h)

    s1, s2 = snap(z1), snap(z2)
    # move the evaluation points with the snapped sources (translation is harmless at O(h))
    d1, d2 = g1 - z1, g2 - z2
    _, (u1, u2) = greens_lattice_oracle(kinds, h, origin, [s1, s2], None)
    a = _interp(u1, h, origin, np.array([s2 + d2, s2]))
    b = _interp(u2, h, origin, np.array([s1 + d1, s1]))
    return ((a[0] - a[1]) + (b[0] - b[1])) / t


# ------------------------------------------------------------- Monte Carlo


def _initial_state(field: FieldModel, driving: DrivingModel):
    X0 = np.angle(driving.start) if driving.circle else driving.start.real
    return X0, driving.marked_lift()


def martingale_mc(field: FieldModel, driving: DrivingModel, z, pairs=None, n_paths=10_000,
                  seed=0, T=0.5, dt=1e-3, stop_radius=0.2, threads=1, label="martingale"):
    """z-score reports for E[M_tau(z)] = M_0(z) and E[M_tau M_tau + C_tau] = M_0 M_0 + C_0."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    pairs = [] if pairs is None else list(pairs)
    X0, mk0 = _initial_state(field, driving)
    zero = np.zeros(len(z), dtype=complex)
    _, per = field.mean_pieces(z, X0, mk0, 0.0, zero, multivalued=True)
    obs = tracker_factory(field, z) if per else None
    ens = simulate(driving, z, T, dt, n_paths, seed, stop_radius,
                   track_log_deriv=field.kappa != 4.0, threads=threads, observer=obs)
    first = ens.times[1]
    if np.mean(ens.t <= first) > 0.5:
        raise DegenerateStopping("more than half of the paths stopped at the first step")
    M0 = field.mean(z, X0, mk0, 0.0, zero)
    Mt = tracked_mean(field, ens)
    params = {"variant": driving.variant.value, "kappa_driving": driving.kappa,
              "kappa_field": field.kappa, "T": T, "dt": dt, "stop_radius": stop_radius, "seed": seed}
    reports = []
    for k, zk in enumerate(z):
        reports.append(report_from_samples(f"{label}:mean", Mt[:, k], M0[k],
                                           dict(params, z=[zk.real, zk.imag])))
    for i, j in pairs:
        C0 = field.covariance(z[i], z[j], 0.0)
        Ct = tracked_covariance(field, ens, i, j)
        reports.append(report_from_samples(f"{label}:covariance", Mt[:, i] * Mt[:, j] + Ct,
                                           M0[i] * M0[j] + C0,
                                           dict(params, z1=[z[i].real, z[i].imag],
                                                z2=[z[j].real, z[j].imag])))
    return reports


class _QvObserver:
    """Accumulates realized cross-variation of the mean at two points."""

    def __init__(self, field, n):
        self.field = field
        self.prev = None
        self.qv = np.zeros(n)
        self.per = [P for P in field.periods()]

    def _values(self, t, X, g, mk):
        return self.field.potential_pieces(g, X[:, None], mk[:, None, :], t) * self.field.scale

    def update(self, idx, t, X, g, logd, mk):
        v = self._values(t, X, g, mk)
        if self.prev is None:
            self.prev = v
            return
        d = v - self.prev[idx]
        for k, P in enumerate(self.per):
            if P is not None:
                d[..., k] -= self.field.scale * P * np.round(d[..., k] / (self.field.scale * P))
        d = d.sum(axis=-1)
        self.qv[idx] += d[:, 0] * d[:, 1]
        self.prev[idx] = v

    def result(self):
        return self.qv[:, None]


def qv_check(field: FieldModel, driving: DrivingModel, z1, z2, n_paths=2000, seed=0, T=0.2,
             dt=1e-4, stop_radius=0.2):
    """Realized <M(z1), M(z2)> against C_0 - C_tau pathwise.

    The report's estimate is mean |QV - (C_0 - C_tau)| / mean (C_0 - C_tau), target 0.
    """
    z = np.array([z1, z2], dtype=complex)
    z1, z2 = complex(z1), complex(z2)
    ens = simulate(driving, z, T, dt, n_paths, seed, stop_radius,
                   observer=lambda n: _QvObserver(field, n))
    qv = ens.observed[:, 0]
    dec = field.covariance(z[0], z[1], 0.0) - tracked_covariance(field, ens, 0, 1)
    rel = float(np.mean(np.abs(qv - dec)) / np.mean(dec))
    se = float(np.std(np.abs(qv - dec), ddof=1) / np.sqrt(n_paths) / np.mean(dec))
    return McReport("qv", rel, 0.0, se, n_paths,
                    {"variant": driving.variant.value, "T": T, "dt": dt, "seed": seed,
                     "z1": [z1.real, z1.imag], "z2": [z2.real, z2.imag]}, tolerance=0.05)


def winding_bridge_check(driving: DrivingModel, n_paths=2000, seed=0, lead=0.01, dt=1e-3,
                         threads=1) -> McReport:
    """arg g_t(x1) - arg X_t at t = p - lead against the linear bridge mean w_0 lead / p."""
    p = driving.modulus
    X0, mk0 = _initial_state(None, driving)
    w0 = float(mk0[0] - X0)
    ens = simulate(driving, T=p - lead, dt=dt, n_paths=n_paths, seed=seed,
                   adaptive_fraction=2 * lead, threads=threads)
    w = ens.marked[:, 0] - ens.X
    return report_from_samples("winding-bridge", w, w0 * lead / p,
                               {"variant": driving.variant.value, "modulus": p, "lead": lead,
                                "dt": dt, "seed": seed, "w0": w0})


# --------------------------------------------------------------- commutation


@dataclass
class CommutationProbe:
    """Two growth points and a correction density J, with the Loewner field V."""

    J: Callable
    V: Callable
    xi_plus: float
    xi_minus: float
    z: complex
    eps_plus: float = 1e-3
    eps_minus: float = 1e-3
    dJ_dx: Callable | None = None
    dJ_dz: Callable | None = None
    dV_dz: Callable | None = None
    fd_step: float = 1e-4

    def __post_init__(self):
        if self.xi_plus == self.xi_minus:
            raise ValueError("growth points must differ")
        if max(self.eps_plus, self.eps_minus) > 1e-3:
            raise ValueError("capacities must be at most 1e-3")

    def _d(self, f, x, z, wrt):
        h = self.fd_step
        if wrt == "x":
            return (f(x + h, z) - f(x - h, z)) / (2 * h)
        return (f(x, z + h) - f(x, z - h)) / (2 * h)

    def jx(self, x, z):
        return self.dJ_dx(x, z) if self.dJ_dx else self._d(self.J, x, z, "x")

    def jz(self, x, z):
        return self.dJ_dz(x, z) if self.dJ_dz else self._d(self.J, x, z, "z")

    def vz(self, x, z):
        return self.dV_dz(x, z) if self.dV_dz else self._d(self.V, x, z, "z")


def commutation_delta(probe: CommutationProbe) -> complex:
    """The six-term bracket: E(xi- first) - E(xi+ first) per unit eps+ eps-."""
    p, m, z = probe.xi_plus, probe.xi_minus, probe.z
    sep = min(abs(p - m), abs(z - p), abs(z - m))
    if sep <= 0.1:
        raise FDStepInvalid("probe points closer than 0.1")
    J, V = probe.J, probe.V
    return complex(2 * probe.vz(m, p) * J(p, z) - 2 * probe.vz(p, m) * J(m, z)
                   + V(m, p) * probe.jx(p, z) - V(p, m) * probe.jx(m, z)
                   + V(m, z) * probe.jz(p, z) - V(p, z) * probe.jz(m, z))


def _grow(probe, x, dur, z, other, logd_other, n_sub):
    """Constant growth at x for time dur: returns E increment, z, other point, log g'(other)."""
    h = dur / n_sub
    E = 0j

    def f(y):
        zz, oo, _ = y
        return np.array([probe.V(x, zz), probe.V(x, oo), probe.vz(x, oo)]), probe.J(x, zz)

    y = np.array([z, other, logd_other], dtype=complex)
    for _ in range(n_sub):
        k1, j1 = f(y)
        k2, j2 = f(y + 0.5 * h * k1)
        k3, j3 = f(y + 0.5 * h * k2)
        k4, j4 = f(y + h * k3)
        y = y + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
        E += h * (j1 + 2 * j2 + 2 * j3 + j4) / 6
    return E, y[0], y[1].real, y[2]


def two_ordering_delta(probe: CommutationProbe, eps: float, n_sub: int = 200) -> complex:
    """[E(xi- first) - E(xi+ first)] / eps^2 for two hulls of duration eps.

    The second hull grows at the image of its base point for duration
    eps |g'(base)|^2, so both orderings end with the same pair of hulls to
    second order.
    """
    p, m, z = probe.xi_plus, probe.xi_minus, probe.z

    def order(first, second):
        E1, z1, sec, ld = _grow(probe, first, eps, z, second, 0j, n_sub)
        dur = eps * abs(np.exp(ld)) ** 2
        E2, _, _, _ = _grow(probe, sec, dur, z1, first, 0j, n_sub)
        return E1 + E2

    return (order(m, p) - order(p, m)) / eps**2


def two_ordering_limit(probe: CommutationProbe, eps=(4e-4, 2e-4, 1e-4)) -> complex:
    """Richardson extrapolation of two_ordering_delta to eps -> 0 (error O(eps))."""
    vals = [two_ordering_delta(probe, e) for e in eps]
    a = 2 * vals[1] - vals[0]
    b = 2 * vals[2] - vals[1]
    return 2 * b - a if len(eps) > 2 else a


def chordal_probe(c, xi_plus, xi_minus, z) -> CommutationProbe:
    return CommutationProbe(
        J=lambda x, w: c / (w - x) ** 2,
        V=lambda x, w: 2 / (w - x),
        xi_plus=xi_plus, xi_minus=xi_minus, z=z,
        dJ_dx=lambda x, w: 2 * c / (w - x) ** 3,
        dJ_dz=lambda x, w: -2 * c / (w - x) ** 3,
        dV_dz=lambda x, w: -2 / (w - x) ** 2,
    )


def strip_probe(c, xi_plus, xi_minus, z, theta=0.0) -> CommutationProbe:
    """J = c d_x S~_x(z) for the strip, V = coth((z - x)/2)."""
    from .kernels import schwarz_strip_dz

    return CommutationProbe(
        J=lambda x, w: -c * schwarz_strip_dz(theta, x, w),
        V=lambda x, w: 1 / np.tanh((w - x) / 2),
        xi_plus=xi_plus, xi_minus=xi_minus, z=z,
        dV_dz=lambda x, w: -0.5 / np.sinh((w - x) / 2) ** 2,
    )


# ------------------------------------------------------------------ capacity


def capacity_check(domain: DomainSpec, x, r_sequence, hull_ratio=0.1, n_steps=200,
                   n_radial=256, n_angular=256):
    """Estimates of d/dt L along constant growth at x, one per radius.

    At radius r the hull grows to diameter about hull_ratio * r (times t and
    2t with t = (hull_ratio r / 2)^2), so the hull stays small against r as r
    shrinks; the rate is the difference quotient between the two times.
    """
    r_sequence = list(r_sequence)
    if any(b >= a for a, b in zip(r_sequence, r_sequence[1:])):
        raise ValueError("r_sequence must decrease")
    out = []
    for r in r_sequence:
        t1 = (hull_ratio * r / 2) ** 2
        t2 = 2 * t1
        dt = t1 / n_steps
        L1, L2 = (
            local_capacity(domain, trace_from_driving(domain, DrivingPath.constant(domain, x, t, dt)),
                           r, n_radial=n_radial, n_angular=n_angular)
            for t in (t1, t2)
        )
        out.append((L2 - L1) / (t2 - t1))
    return np.array(out)
