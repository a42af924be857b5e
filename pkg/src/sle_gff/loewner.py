"""Loewner chains in the half-plane, disc, strip and annulus."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .domains import DomainKind, DomainSpec
from .errors import (
    CapacityStall,
    HullTooLarge,
    InverseDivergence,
    ModulusExhausted,
    SelfIntersection,
    StepTooLarge,
    UnsupportedProfile,
)
from .io import read_csv, write_csv
from .kernels import InnerBC, schwarz_annulus, schwarz_annulus_dz

TWO_PI = 2 * np.pi
CIRCLE_KINDS = (DomainKind.DISC, DomainKind.ANNULUS)


# --------------------------------------------------------------- vector fields


def vector_field(kind, x, g, modulus=None, tol=1e-14):
    """V_x(g): 2/(g-x), -g(g+x)/(g-x), coth((g-x)/2) or 2 pi g S^m_x(g)."""
    kind = DomainKind(kind)
    if kind is DomainKind.HALF_PLANE:
        return 2.0 / (g - x)
    if kind is DomainKind.DISC:
        return -g * (g + x) / (g - x)
    if kind is DomainKind.STRIP:
        return 1.0 / np.tanh((g - x) / 2)
    return TWO_PI * g * schwarz_annulus(modulus, InnerBC.DIRICHLET_CONST, x, g, tol=tol)


def vector_field_dz(kind, x, g, modulus=None, tol=1e-14):
    kind = DomainKind(kind)
    if kind is DomainKind.HALF_PLANE:
        return -2.0 / (g - x) ** 2
    if kind is DomainKind.DISC:
        return -(g * g - 2 * g * x - x * x) / (g - x) ** 2
    if kind is DomainKind.STRIP:
        return -0.5 / np.sinh((g - x) / 2) ** 2
    s = schwarz_annulus(modulus, InnerBC.DIRICHLET_CONST, x, g, tol=tol)
    ds = schwarz_annulus_dz(modulus, InnerBC.DIRICHLET_CONST, x, g, tol=tol)
    return TWO_PI * (s + g * ds)


def rk4_step(kind, g, x0, x1, t0, h, p=None, tol=1e-14, logd=None):
    """One RK4 step of dg/dt = V_{X(t)}(g) with X linear between x0 and x1.

    For circle domains x0, x1 are angles (lifted), otherwise boundary points.
    ``logd`` (log g') is advanced alongside when given.
    """
    circle = DomainKind(kind) in CIRCLE_KINDS

    def drive(s):
        a = x0 + s * (x1 - x0)
        return np.exp(1j * a) if circle else a

    def mod(s):
        return None if p is None else p - (t0 + s * h)

    def f(s, gg):
        return vector_field(kind, drive(s), gg, mod(s), tol)

    k1 = f(0.0, g)
    k2 = f(0.5, g + 0.5 * h * k1)
    k3 = f(0.5, g + 0.5 * h * k2)
    k4 = f(1.0, g + h * k3)
    g_new = g + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
    if logd is None:
        return g_new
    d1 = vector_field_dz(kind, drive(0.0), g, mod(0.0), tol)
    d2 = vector_field_dz(kind, drive(0.5), g + 0.5 * h * k1, mod(0.5), tol)
    d3 = vector_field_dz(kind, drive(0.5), g + 0.5 * h * k2, mod(0.5), tol)
    d4 = vector_field_dz(kind, drive(1.0), g + h * k3, mod(1.0), tol)
    return g_new, logd + h * (d1 + 2 * d2 + 2 * d3 + d4) / 6


# -------------------------------------------------------------------- driving


@dataclass(frozen=True)
class DrivingPath:
    times: np.ndarray
    values: np.ndarray
    interpolation: str = "linear"
    circle: bool = False

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        if t.ndim != 1 or len(t) != len(v) or len(t) < 1:
            raise ValueError("times and values must be 1-d of equal length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("driving time grid must be strictly increasing")
        if self.circle and np.any(np.abs(np.abs(v) - 1) > 1e-9):
            raise ValueError("circle driving values must lie on the unit circle")
        if not self.circle and np.any(np.abs(v.imag) > 1e-12):
            raise ValueError("driving values must be real")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def angles(self):
        """Continuous lift of the driving angle (circle domains)."""
        return np.unwrap(np.angle(self.values))

    def lifted(self):
        return self.angles if self.circle else self.values.real

    def __call__(self, t):
        lift = self.lifted()
        if self.interpolation == "constant":
            i = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 1)
            a = lift[i]
        else:
            a = np.interp(t, self.times, lift)
        return np.exp(1j * a) if self.circle else a + 0j

    @classmethod
    def constant(cls, domain: DomainSpec, x, T: float, dt: float):
        n = int(round(T / dt))
        times = np.linspace(0, n * dt, n + 1)
        return cls(times, np.full(n + 1, complex(x)), circle=domain.kind in CIRCLE_KINDS)

    @classmethod
    def from_lift(cls, domain: DomainSpec, times, lift):
        circle = domain.kind in CIRCLE_KINDS
        vals = np.exp(1j * np.asarray(lift)) if circle else np.asarray(lift) + 0j
        return cls(np.asarray(times), vals, circle=circle)

    def to_csv(self, path, config=None, seed=None):
        write_csv(path, {"t": self.times, "X_re": self.values.real, "X_im": self.values.imag},
                  config, seed)

    @classmethod
    def from_csv(cls, path, domain: DomainSpec):
        cols, _ = read_csv(path)
        vals = cols["X_re"] + 1j * cols["X_im"]
        return cls(cols["t"], vals, circle=domain.kind in CIRCLE_KINDS)


# ---------------------------------------------------------------------- state


@dataclass
class LoewnerState:
    domain: DomainSpec
    t: float = 0.0
    X: complex = 0.0
    ids: tuple = ()
    points: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    log_deriv: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    swallowed: frozenset = frozenset()

    @classmethod
    def start(cls, domain: DomainSpec, x, tracked: dict):
        pts = np.array(list(tracked.values()), dtype=complex)
        return cls(domain, 0.0, complex(x), tuple(tracked), pts, np.zeros(len(pts), dtype=complex))

    @property
    def modulus_remaining(self):
        if self.domain.kind is not DomainKind.ANNULUS:
            return None
        return self.domain.modulus - self.t

    @property
    def tracked(self) -> dict:
        return {k: complex(v) for k, v in zip(self.ids, self.points) if k not in self.swallowed}


def evolve(state: LoewnerState, driving: DrivingPath, dt: float, T: float,
           swallow_radius: float = 1e-6, max_iterations: int = 100_000, tol: float = 1e-14,
           track_log_deriv: bool = False) -> LoewnerState:
    """Advance tracked points from state.t to absolute time T.

    Every point carries its own clock and takes RK4 steps of size
    min(dt, 0.05 |g - X|^2), the pole of the vector field being the dominant
    error source.  Points closer than swallow_radius to the driving point are
    frozen and marked swallowed.
    """
    kind = state.domain.kind
    p = state.domain.modulus
    if kind is DomainKind.ANNULUS and T >= p:
        raise ModulusExhausted(f"T={T} reaches the modulus p={p}")
    circle = kind in CIRCLE_KINDS
    g = state.points.copy()
    logd = state.log_deriv.copy()
    alive = np.array([k not in state.swallowed for k in state.ids], dtype=bool)
    lift = driving.lifted()
    clock = np.full(len(g), float(state.t))
    for _ in range(max_iterations):
        act = alive & (clock < T - 1e-15)
        if not act.any():
            break
        t0 = clock[act]
        a0 = np.interp(t0, driving.times, lift)
        x0 = np.exp(1j * a0) if circle else a0
        dist = np.abs(g[act] - x0)
        gone = dist < swallow_radius
        if gone.any():
            idx = np.nonzero(act)[0][gone]
            alive[idx] = False
            continue
        h = np.minimum(np.minimum(dt, 0.05 * dist**2), T - t0)
        a1 = np.interp(t0 + h, driving.times, lift)
        if kind is DomainKind.ANNULUS:
            # the kernel modulus depends on time: points sharing a clock value
            # take a common (smallest) step
            gs, ls = g[act], logd[act]
            for tv in np.unique(t0):
                sel = t0 == tv
                hv = h[sel].min()
                h[sel] = hv
                a1[sel] = np.interp(tv + hv, driving.times, lift)
                res = rk4_step(kind, gs[sel], a0[sel], a1[sel], tv, hv, p, tol,
                               logd=ls[sel] if track_log_deriv else None)
                if track_log_deriv:
                    gs[sel], ls[sel] = res
                else:
                    gs[sel] = res
            g[act], logd[act] = gs, ls
        elif track_log_deriv:
            g[act], logd[act] = rk4_step(kind, g[act], a0, a1, t0, h, logd=logd[act])
        else:
            g[act] = rk4_step(kind, g[act], a0, a1, t0, h)
        clock[act] = t0 + h
    else:
        raise StepTooLarge(f"adaptive stepping did not reach T={T}")
    swallowed = set(state.swallowed)
    swallowed.update(k for k, a in zip(state.ids, alive) if not a)
    return replace(state, t=T, X=complex(driving(T)), points=g, log_deriv=logd,
                   swallowed=frozenset(swallowed))


# ---------------------------------------------------------------------- trace


def _slit_inverse(w, a, dt):
    """Inverse of the vertical slit map z -> a + sqrt((z-a)^2 + 4 dt), into the closed half-plane."""
    c = 2.0 * np.sqrt(dt)
    w = w.real + 1j * np.maximum(w.imag, 0.0)
    return a + np.sqrt(w - a - c) * np.sqrt(w - a + c)


def _inward(kind, x):
    if kind is DomainKind.HALF_PLANE or kind is DomainKind.STRIP:
        return 1j
    return -x


def trace_from_driving(domain: DomainSpec, driving: DrivingPath, tol: float = 1e-12) -> np.ndarray:
    """Points gamma(t_k) = g_{t_k}^{-1}(X_{t_k}) of the trace, gamma(0) = X_0."""
    kind = domain.kind
    times = driving.times
    lift = driving.lifted()
    n = len(times) - 1
    out = np.empty(n + 1, dtype=complex)
    out[0] = driving.values[0]
    if n == 0:
        return out
    mids = 0.5 * (lift[1:] + lift[:-1])
    dts = np.diff(times)
    if kind is DomainKind.HALF_PLANE:
        # driving held at its right-endpoint value on each interval, so the
        # newest point sits exactly at the tip of its slit;
        # pts[k] pulls back X_{k+1} and at stage j all k >= j are active
        pts = lift[1:].astype(complex)
        for j in range(n - 1, -1, -1):
            pts[j:] = _slit_inverse(pts[j:], lift[j + 1], dts[j])
        out[1:] = pts
        return out
    circle = kind in CIRCLE_KINDS
    p = domain.modulus
    pts = np.zeros(n, dtype=complex)
    for j in range(n - 1, -1, -1):
        # seed the newest point one elementary slit inside the domain
        xm = np.exp(1j * mids[j]) if circle else mids[j]
        pts[j] = xm + 2.0 * np.sqrt(dts[j]) * _inward(kind, xm)
        act = pts[j + 1:]
        if len(act):
            a0, a1 = lift[j + 1], lift[j]
            x0 = np.exp(1j * a0) if circle else a0
            dist = np.abs(act - x0)
            nsub = np.clip(np.ceil(dts[j] / (0.05 * dist**2)), 1, 256).astype(int)
            for m in np.unique(nsub):
                sel = nsub == m
                gs = act[sel]
                hs = -dts[j] / m
                for k in range(m):
                    b0 = a0 + (a1 - a0) * k / m
                    b1 = a0 + (a1 - a0) * (k + 1) / m
                    gs = rk4_step(kind, gs, b0, b1, times[j + 1] + k * hs, hs, p, tol)
                act[sel] = gs
            pts[j + 1:] = act
        if not np.all(np.isfinite(pts[j:])):
            raise InverseDivergence("backward flow produced non-finite values")
    bad = ~domain.contains(pts) & ~np.array([domain.on_boundary(z, 1e-6) for z in pts])
    if np.any(bad):
        raise InverseDivergence(f"{bad.sum()} trace points left the domain")
    out[1:] = pts
    return out


def _point_polyline_distance(pts, poly, chunk=512):
    a, b = poly[:-1], poly[1:]
    ab = b - a
    L2 = np.maximum(np.abs(ab) ** 2, 1e-300)
    out = np.empty(len(pts))
    for i in range(0, len(pts), chunk):
        p = pts[i:i + chunk, None]
        s = np.clip(((p - a) * np.conj(ab)).real / L2, 0, 1)
        out[i:i + chunk] = np.abs(p - (a + s * ab)).min(axis=1)
    return out


def polyline_hausdorff(a, b) -> float:
    """Hausdorff distance between two polylines, measured from vertices to segments."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if len(a) == 1 or len(b) == 1:
        return float(np.abs(a[:, None] - b[None, :]).min(axis=1).max())
    return float(max(_point_polyline_distance(a, b).max(), _point_polyline_distance(b, a).max()))


# --------------------------------------------------------------------- zipper


def _segments_cross(a, b, c, d):
    """Proper intersection of segment ab with segments cd (vectorized over c, d)."""
    def cross(o, p, q):
        # orientation sign with collinear (rounding-level) cases set to zero
        c = (p - o).real * (q - o).imag - (p - o).imag * (q - o).real
        return np.where(np.abs(c) <= 1e-12 * np.abs(p - o) * np.abs(q - o), 0.0, c)

    d1, d2 = cross(c, d, a), cross(c, d, b)
    d3, d4 = cross(a, b, c), cross(a, b, d)
    return (d1 * d2 < 0) & (d3 * d4 < 0)


def check_simple(curve, min_gap: int = 2):
    """Raise SelfIntersection if segment i properly crosses segment j >= i + min_gap.

    min_gap > 2 ignores zig-zags between nearby samples, which are artifacts
    of joining sampled points by chords rather than crossings of the curve.
    """
    z = np.asarray(curve, dtype=complex)
    for i in range(len(z) - 1 - min_gap):
        j = i + min_gap
        if np.any(_segments_cross(z[i], z[i + 1], z[j:-1], z[j + 1:])):
            raise SelfIntersection(f"segment {i} crosses a later segment")


def driving_from_curve(domain: DomainSpec, curve, check: bool = True,
                       stall: float = 1e-14, min_gap: int = 3, skip_stalls: bool = False) -> DrivingPath:
    """Zipper with vertical slits: each curve point, mapped down, is unzipped by one slit map.

    With ``skip_stalls`` a point adding less than ``stall`` capacity (a point at
    the bottom of a nearly closed fjord) is dropped instead of raising.
    """
    if domain.kind is not DomainKind.HALF_PLANE:
        raise UnsupportedProfile("the zipper is implemented for the half-plane")
    z = np.asarray(curve, dtype=complex)
    if abs(z[0].imag) > 1e-9:
        raise ValueError("curve must start on the real line")
    if check:
        check_simple(z, min_gap)
    w = z[1:] - z[0].real
    times = [0.0]
    xs = [z[0].real]
    t = 0.0
    for k in range(len(w)):
        a, b = w[k].real, w[k].imag
        if b * b / 4 < stall:
            if skip_stalls:
                continue
            raise CapacityStall(f"segment {k} adds capacity {b * b / 4:.2e}")
        t += b * b / 4
        times.append(t)
        xs.append(a + z[0].real)
        rest = w[k + 1:]
        # forward slit map, branch continuous with identity at infinity
        rest = rest.real + 1j * np.maximum(rest.imag, 0.0)
        w[k + 1:] = a + np.sqrt(rest - a - 1j * b) * np.sqrt(rest - a + 1j * b)
        w[k] = a
    return DrivingPath(np.array(times), np.array(xs) + 0j)


# ------------------------------------------------------------- local capacity


def _normalizing_map(domain: DomainSpec, x0):
    """Conformal map to the half-plane with f(x0) = 0 and |f'(x0)| = 1.

    Returns (f, obstacle) where obstacle is (center, radius) of the image of the
    inner disc for the annulus, else None.
    """
    kind = domain.kind
    x0 = complex(x0)
    if kind is DomainKind.HALF_PLANE:
        return (lambda z: z - x0), None
    if kind is DomainKind.STRIP:
        if abs(x0.imag) < 1e-9:
            return (lambda z: np.exp(z - x0) - 1), None
        return (lambda z: 1 - np.exp(z - x0)), None
    if kind is DomainKind.ANNULUS and abs(abs(x0) - 1) > 1e-9:
        raise UnsupportedProfile("local capacity is implemented for hulls rooted on the outer circle")

    def f(z):
        u = z / x0
        return 2j * (1 - u) / (1 + u)

    if kind is DomainKind.DISC:
        return f, None
    q = np.exp(-domain.modulus)
    lo, hi = 2 * (1 - q) / (1 + q), 2 * (1 + q) / (1 - q)
    return f, (0.5j * (lo + hi), 0.5 * (hi - lo))


def _boundary_distance(domain: DomainSpec, z):
    kind = domain.kind
    if kind is DomainKind.HALF_PLANE:
        return z.imag
    if kind is DomainKind.STRIP:
        return np.minimum(z.imag, np.pi - z.imag)
    if kind is DomainKind.DISC:
        return 1 - np.abs(z)
    return np.minimum(1 - np.abs(z), np.abs(z) - np.exp(-domain.modulus))


def local_capacity(domain: DomainSpec, hull_samples, r: float, n_radial: int = 512,
                   n_angular: int = 512, inner_ratio: float = 1e-3, outer_ratio: float = 200.0,
                   n_quad: int = 256, richardson: bool = True) -> float:
    """Local half-plane capacity of a hull rooted at hull_samples[0].

    The lattice error is first order in the cell size (the rasterized hull tip),
    so by default the result is Richardson-extrapolated from grids n and n/2.
    """
    args = (domain, hull_samples, r)
    kw = dict(inner_ratio=inner_ratio, outer_ratio=outer_ratio, n_quad=n_quad)
    fine = _local_capacity_grid(*args, n_radial=n_radial, n_angular=n_angular, **kw)
    if not richardson or fine == 0.0:
        return fine
    coarse = _local_capacity_grid(*args, n_radial=n_radial // 2, n_angular=n_angular // 2, **kw)
    return 2 * fine - coarse


def _local_capacity_grid(domain: DomainSpec, hull_samples, r: float, n_radial: int,
                         n_angular: int, inner_ratio: float, outer_ratio: float,
                         n_quad: int) -> float:
    """(2/pi) int Psi(x0 + r e^{i theta}) r sin(theta) d theta over the arc in the domain.

    With this prefactor L is the half-plane capacity in the normalization
    g(z) = z + hcap/z + ..., so the slit [0, 2i sqrt(t)] has L = 2t.

    Psi is harmonic off the hull, equals the distance to the boundary on the hull
    and 0 on the domain boundary.  It is solved on a log-polar lattice around the
    origin in the half-plane picture f(domain) where f(x0) = 0, |f'(x0)| = 1.
    """
    from .lattice import FIXED, UNKNOWN, solve_rect

    z = np.asarray(hull_samples, dtype=complex)
    if len(z) < 2:
        return 0.0
    x0 = z[0]
    diam = np.max(np.abs(z - x0))
    if diam == 0:
        return 0.0
    if diam >= r:
        raise HullTooLarge(f"hull diameter {diam:.3g} exceeds r={r:.3g}")
    f, obstacle = _normalizing_map(domain, x0)
    w = f(z)
    rho_min = inner_ratio * diam
    rho_max = outer_ratio * r
    # align the radial grid so the hull tip (farthest point) sits on a node
    hs = (np.log(rho_max) - np.log(rho_min)) / (n_radial - 1)
    s_tip = np.log(np.max(np.abs(w)))
    s0 = s_tip - np.floor((s_tip - np.log(rho_min)) / hs) * hs
    s = s0 + hs * np.arange(n_radial)
    th = np.linspace(0, np.pi, n_angular + 1)
    hs, ht = s[1] - s[0], th[1] - th[0]
    S, TH = np.meshgrid(s, th, indexing="ij")
    W = np.exp(S + 1j * TH)
    kinds = np.full(W.shape, UNKNOWN)
    vals = np.zeros(W.shape)
    kinds[:, 0] = FIXED
    kinds[:, -1] = FIXED
    kinds[0, :] = FIXED
    kinds[-1, :] = FIXED
    if obstacle is not None:
        c, rad = obstacle
        kinds[np.abs(W - c) <= rad] = FIXED
    # rasterize the hull: densified curve points snap to their nearest node,
    # which becomes a Dirichlet node carrying the distance to the boundary
    zs = _densify(z, f, min(hs, ht), rho_min)
    dense = f(zs)
    lr = np.log(np.maximum(np.abs(dense), rho_min * 1e-3))
    ang = np.angle(dense)
    i_s = np.rint((lr - s[0]) / hs).astype(int)
    i_t = np.rint(ang / ht).astype(int)
    ok = (i_s >= 0) & (i_s < n_radial) & (i_t > 0) & (i_t < n_angular)
    dist = _boundary_distance(domain, zs)
    kinds[i_s[ok], i_t[ok]] = FIXED
    vals[i_s[ok], i_t[ok]] = dist[ok]
    psi = solve_rect(kinds, vals, hs, ht, sides=("dirichlet",) * 4)
    # quadrature on the circle |z - x0| = r in original coordinates
    n_in = domain.inward_normal(x0)
    phi = (np.arange(n_quad) + 0.5) * np.pi / n_quad
    zc = x0 + r * n_in * np.exp(1j * (phi - np.pi / 2))
    inside = domain.contains(zc)
    wc = f(zc[inside])
    from scipy.interpolate import RegularGridInterpolator

    interp = RegularGridInterpolator((s, th), psi, method="linear")
    vals_c = np.zeros(n_quad)
    vals_c[inside] = interp(np.stack([np.log(np.abs(wc)), np.mod(np.angle(wc), 2 * np.pi)], -1))
    return float(2.0 / np.pi * np.sum(vals_c * r * np.sin(phi)) * (np.pi / n_quad))


def _densify(z, f, h, rho_min):
    """Subdivide the curve so consecutive images under f are a quarter log-polar cell apart."""
    w = f(z)
    out = [z[:1]]
    for k in range(len(z) - 1):
        scale = max(min(abs(w[k]), abs(w[k + 1])), rho_min)
        m = int(np.ceil(abs(w[k + 1] - w[k]) / (0.25 * h * scale)))
        m = min(max(m, 1), 20000)
        out.append(z[k] + (z[k + 1] - z[k]) * np.arange(1, m + 1) / m)
    return np.concatenate(out)
