"""Discrete Gaussian free fields on box lattices, their zero level lines and
a two-stage (curve first, field second) sampling test."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domains import LAMBDA, half_plane
from .errors import CapacityStall, FactorizationFailure, NoInterface, SelfIntersection, UnsupportedProfile
from .kernels import green_half_plane
from .lattice import FIXED, UNKNOWN
from .loewner import DrivingPath, driving_from_curve, trace_from_driving
from .sle import DrivingModel, simulate
from .verify import McReport

# Unit conductances on the square lattice: the sampled covariance converges to
# the Green's function with -Lap G = delta, the normalization in which the
# continuum jump is 2 sqrt(pi/8).  lattice_calibration() re-measures it.
LATTICE_CALIBRATION = 1.0

MIN_CUT_FRACTION = 1e-3  # cut edges shorter than this fraction of h are clamped


@dataclass
class GffLattice:
    """Nodes origin + h (i + 1j j); FIXED nodes carry boundary values.

    ``edges`` (a, b, w) couple node pairs (flat indices) with conductance w;
    ``ghosts`` (a, value, w) couple a node to a fixed value sitting inside a
    cut edge.  The field has density proportional to
    exp(-1/2 sum w (u_a - u_b)^2) with FIXED nodes held at their values.
    """

    kinds: np.ndarray
    values: np.ndarray
    h: float
    origin: complex
    edges: tuple
    ghosts: tuple = (np.zeros(0, int), np.zeros(0), np.zeros(0))
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def shape(self):
        return self.kinds.shape

    @property
    def points(self) -> np.ndarray:
        na, nb = self.shape
        i, j = np.meshgrid(np.arange(na), np.arange(nb), indexing="ij")
        return self.origin + self.h * (i + 1j * j)

    def node(self, z) -> tuple[int, int]:
        w = (complex(z) - self.origin) / self.h
        return int(round(w.real)), int(round(w.imag))

    def _system(self):
        if "lu" in self._cache:
            return self._cache
        na, nb = self.shape
        free = (self.kinds.ravel() == UNKNOWN)
        idx = -np.ones(na * nb, dtype=np.int64)
        idx[free] = np.arange(int(free.sum()))
        n = int(free.sum())
        vals = self.values.ravel()
        a, b, w = self.edges
        ga, gv, gw = self.ghosts
        rows, cols, data = [], [], []
        rhs = np.zeros(n)
        # incidence rows: one per edge with an unknown end, one per ghost edge
        inc_r, inc_c, inc_d = [], [], []
        fa, fb = free[a], free[b]
        keep = fa | fb
        a, b, w = a[keep], b[keep], w[keep]
        fa, fb = fa[keep], fb[keep]
        sw = np.sqrt(w)
        e = np.arange(len(a))
        for end, other, f_end, f_other in ((a, b, fa, fb), (b, a, fb, fa)):
            rows.append(idx[end[f_end]])
            cols.append(idx[end[f_end]])
            data.append(w[f_end])
            both = f_end & f_other
            rows.append(idx[end[both]])
            cols.append(idx[other[both]])
            data.append(-w[both])
            half = f_end & ~f_other
            np.add.at(rhs, idx[end[half]], w[half] * vals[other[half]])
        inc_r += [e[fa], e[fb]]
        inc_c += [idx[a[fa]], idx[b[fb]]]
        inc_d += [sw[fa], -sw[fb]]
        gk = free[ga]
        ga, gv, gw = ga[gk], gv[gk], gw[gk]
        rows.append(idx[ga])
        cols.append(idx[ga])
        data.append(gw)
        np.add.at(rhs, idx[ga], gw * gv)
        m = len(a)
        inc_r.append(m + np.arange(len(ga)))
        inc_c.append(idx[ga])
        inc_d.append(np.sqrt(gw))
        A = sp.csc_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n, n))
        B = sp.csr_matrix((np.concatenate(inc_d), (np.concatenate(inc_r), np.concatenate(inc_c))),
                          shape=(m + len(ga), n))
        try:
            lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A")
        except RuntimeError as exc:  # singular: a component without Dirichlet data
            raise FactorizationFailure(str(exc)) from exc
        self._cache.update(lu=lu, B=B, rhs=rhs, idx=idx, free=free, A=A)
        return self._cache

    def harmonic_mean(self) -> np.ndarray:
        """Discrete harmonic extension of the boundary data (the field's mean)."""
        c = self._system()
        out = self.values.ravel().astype(float).copy()
        out[c["free"]] = c["lu"].solve(c["rhs"])
        return out.reshape(self.shape)

    def sample(self, rng: np.random.Generator, n: int = 1) -> np.ndarray:
        """n fields, shape (n, na, nb).

        With A = B^T B (B the weighted incidence matrix), A^{-1}(rhs + B^T xi)
        has mean A^{-1} rhs and covariance A^{-1}.
        """
        c = self._system()
        xi = rng.standard_normal((c["B"].shape[0], n))
        sol = c["lu"].solve(c["rhs"][:, None] + c["B"].T @ xi)
        out = np.repeat(self.values.ravel()[None, :].astype(float), n, axis=0)
        out[:, c["free"]] = sol.T
        return out.reshape((n,) + self.shape)

    def green(self, z1) -> np.ndarray:
        """Column of A^{-1} at the node nearest z1 (the sampler's covariance)."""
        c = self._system()
        i, j = self.node(z1)
        k = c["idx"][np.ravel_multi_index((i, j), self.shape)]
        if k < 0:
            raise ValueError("z1 must be a free node")
        e = np.zeros(c["A"].shape[0])
        e[k] = 1.0
        out = np.zeros(self.kinds.size)
        out[c["free"]] = c["lu"].solve(e)
        return out.reshape(self.shape)

    def value_at(self, grid, z):
        """Read a nodal array at the nodes nearest z (last two axes are the grid)."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        w = (z - self.origin) / self.h
        i, j = np.rint(w.real).astype(int), np.rint(w.imag).astype(int)
        return grid[..., i, j]

    def with_slit(self, curve, jump: float = LAMBDA) -> "GffLattice":
        """Cut every lattice edge the polyline crosses; the node on the left of the
        curve sees +jump at the crossing, the node on the right -jump."""
        return replace(self, _cache={}, **_cut_edges(self, np.asarray(curve, dtype=complex), jump))


def _grid_edges(na, nb):
    flat = np.arange(na * nb).reshape(na, nb)
    a = np.concatenate([flat[:-1, :].ravel(), flat[:, :-1].ravel()])
    b = np.concatenate([flat[1:, :].ravel(), flat[:, 1:].ravel()])
    return a, b, np.ones(len(a))


def chordal_box(resolution: int = 128, half_width: float = 4.0, lam: float = LAMBDA,
                far_values=None) -> GffLattice:
    """Box [-W, W] x [0, 2W] with resolution cells per side.

    The bottom carries +lam left of 0 and -lam right of it; the other sides get
    ``far_values(z)`` (default: the chordal harmonic mean with these levels).
    """
    n = int(resolution)
    h = 2 * half_width / n
    origin = complex(-half_width, 0.0)
    kinds = np.full((n + 1, n + 1), UNKNOWN)
    kinds[0, :] = kinds[-1, :] = kinds[:, 0] = kinds[:, -1] = FIXED
    i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    z = origin + h * (i + 1j * j)
    vals = np.zeros(z.shape)
    if far_values is None:
        def far_values(w):
            return 2 * lam / np.pi * np.angle(w) - lam
    side = kinds == FIXED
    bottom = side & (j == 0)
    vals[side & ~bottom] = far_values(z[side & ~bottom])
    x = z.real[bottom]
    vals[bottom] = np.where(np.abs(x) < 0.5 * h, 0.0, np.where(x < 0, lam, -lam))
    return GffLattice(kinds, vals, h, origin, _grid_edges(n + 1, n + 1))


def _cut_edges(lat: GffLattice, curve, jump):
    na, nb = lat.shape
    h, o = lat.h, lat.origin
    w = (curve - o) / h  # curve in lattice units
    p, q = w[:-1], w[1:]
    cuts = {}  # (node_a, node_b) -> list of (fraction from a, side sign of a)

    def record(na_, nb_, frac, seg, other):
        key = (na_, nb_)
        d = q[seg] - p[seg]
        rel = other - p[seg]
        side_a = np.sign(d.real * rel.imag - d.imag * rel.real)
        cuts.setdefault(key, []).append((frac, side_a))

    for axis in (0, 1):
        # axis 0: horizontal edges (i, j)-(i+1, j) cross where the segment meets y = j
        pa = p.imag if axis == 0 else p.real
        qa = q.imag if axis == 0 else q.real
        lo, hi = np.minimum(pa, qa), np.maximum(pa, qa)
        for s in np.nonzero(np.ceil(lo) <= np.floor(hi))[0]:
            for lvl in range(int(np.ceil(lo[s])), int(np.floor(hi[s])) + 1):
                if qa[s] == pa[s]:
                    continue
                tau = (lvl - pa[s]) / (qa[s] - pa[s])
                c = p[s] + tau * (q[s] - p[s])
                along = c.real if axis == 0 else c.imag
                k = int(np.floor(along))
                if axis == 0:
                    if not (0 <= lvl < nb and 0 <= k < na - 1):
                        continue
                    a, b = (k, lvl), (k + 1, lvl)
                else:
                    if not (0 <= lvl < na and 0 <= k < nb - 1):
                        continue
                    a, b = (lvl, k), (lvl, k + 1)
                frac = along - k
                ia = np.ravel_multi_index(a, (na, nb))
                ib = np.ravel_multi_index(b, (na, nb))
                record(ia, ib, frac, s, complex(*a))
    if not cuts:
        return {}
    ea, eb, ew = lat.edges
    lookup = {(int(x), int(y)): k for k, (x, y) in enumerate(zip(ea, eb))}
    drop = np.zeros(len(ea), bool)
    ga, gv, gw = [list(v) for v in lat.ghosts]
    for (ia, ib), hits in cuts.items():
        k = lookup.get((ia, ib))
        if k is None:
            continue
        drop[k] = True
        hits.sort()
        fa, sa = hits[0]
        fb, sb = hits[-1]
        # the node on the far end sees the opposite side of the same crossing
        da = max(fa, MIN_CUT_FRACTION)
        db = max(1 - fb, MIN_CUT_FRACTION)
        ga += [ia, ib]
        gv += [jump * (sa if sa else 1.0), -jump * (sb if sb else 1.0)]
        gw += [ew[k] / da, ew[k] / db]
    keep = ~drop
    return dict(edges=(ea[keep], eb[keep], ew[keep]),
                ghosts=(np.array(ga, int), np.array(gv, float), np.array(gw, float)))


def sample_dgff(lattice: GffLattice, seed: int = 0, n: int = 1) -> np.ndarray:
    """n independent fields (shape (n, na, nb)), reproducible by seed."""
    return lattice.sample(np.random.default_rng(seed), n)


def lattice_calibration(resolution: int = 128, half_width: float = 8.0, z1=1j, z2=2j) -> float:
    """Ratio of the sampler's covariance to the continuum half-plane Green's function."""
    lat = chordal_box(resolution, half_width)
    g = lat.value_at(lat.green(z1), z2)[0]
    return float(g / green_half_plane(complex(z1), complex(z2)))


# ---------------------------------------------------------------- interfaces

# triangulated square lattice: the six neighbour directions in ccw order
_DIRS = [(1, 0), (1, 1), (0, 1), (-1, 0), (-1, -1), (0, -1)]


def _boundary_cycle(na, nb):
    """Boundary nodes of the rectangle in ccw order."""
    out = [(i, 0) for i in range(na - 1)]
    out += [(na - 1, j) for j in range(nb - 1)]
    out += [(i, nb - 1) for i in range(na - 1, 0, -1)]
    out += [(0, j) for j in range(nb - 1, 0, -1)]
    return out


def level_line(field_values, h: float = 1.0, origin: complex = 0j, level: float = 0.0,
               start=None) -> np.ndarray:
    """Interface between {u > level} (left) and {u <= level} (right).

    It is explored on the triangulated lattice (diagonals (1, 1)) from the
    boundary edge where the ccw boundary order passes from + to -, and
    stops when it leaves the lattice.  Returns edge midpoints as complex
    numbers.  With several such boundary edges the one nearest ``start`` is used.
    """
    u = np.asarray(field_values, dtype=float)
    na, nb = u.shape
    plus = u > level
    cyc = _boundary_cycle(na, nb)
    starts = [(cyc[k], cyc[(k + 1) % len(cyc)]) for k in range(len(cyc))
              if plus[cyc[k]] and not plus[cyc[(k + 1) % len(cyc)]]]
    if not starts:
        raise NoInterface("boundary data has one sign")
    if start is not None and len(starts) > 1:
        s = complex(start)

        def dist(e):
            m = origin + h * 0.5 * complex(e[0][0] + e[1][0], e[0][1] + e[1][1])
            return abs(m - s)
        starts.sort(key=dist)
    a, b = starts[0]
    pts = []
    for _ in range(6 * na * nb):
        pts.append(origin + h * 0.5 * complex(a[0] + b[0], a[1] + b[1]))
        d = (b[0] - a[0], b[1] - a[1])
        k = _DIRS.index(d)
        # third vertex of the triangle on the left of a -> b
        e = _DIRS[(k + 1) % 6]
        w = (a[0] + e[0], a[1] + e[1])
        if not (0 <= w[0] < na and 0 <= w[1] < nb):
            break
        if plus[w]:
            a = w
        else:
            b = w
    else:
        raise NoInterface("exploration did not terminate")
    return np.array(pts)


def truncate_curve(curve, radius: float, center: complex = 0j):
    """Initial piece of the curve up to its first exit from the disc of the given radius."""
    out = np.nonzero(np.abs(np.asarray(curve) - center) >= radius)[0]
    return curve if len(out) == 0 else curve[: out[0]]


def estimate_kappa(curves, domain=None, dt_sample: float = 0.03) -> list:
    """Pooled QV rate (kappa) and drift of the driving functions of the curves.

    Each curve goes through the zipper; its driving function is read on the
    capacity grid k dt_sample.  Returns [kappa report, drift report]; curves the
    zipper rejects are dropped and counted in the params.
    """
    domain = half_plane() if domain is None else domain
    sq, dx, tt = [], [], []
    dropped = 0
    for c in curves:
        try:
            dp = driving_from_curve(domain, c, check=False, skip_stalls=True)
        except (CapacityStall, SelfIntersection, ValueError):
            dropped += 1
            continue
        grid = np.arange(0.0, dp.times[-1] + 1e-15, dt_sample)
        if len(grid) < 2:
            dropped += 1
            continue
        X = np.interp(grid, dp.times, dp.values.real)
        inc = np.diff(X)
        sq.append(np.sum(inc**2))
        dx.append(X[-1] - X[0])
        tt.append(grid[-1] - grid[0])
    sq, dx, tt = map(np.asarray, (sq, dx, tt))
    n = len(tt)
    if n < 2:
        raise NoInterface("fewer than two usable curves")
    # ratio estimators with delta-method standard errors
    k_hat = sq.sum() / tt.sum()
    k_se = np.std(sq - k_hat * tt, ddof=1) * np.sqrt(n) / tt.sum()
    d_hat = dx.sum() / tt.sum()
    d_se = np.std(dx - d_hat * tt, ddof=1) * np.sqrt(n) / tt.sum()
    params = {"n_curves": n, "dropped": dropped, "dt_sample": dt_sample}
    return [McReport("kappa", float(k_hat), 4.0, float(k_se), n, params),
            McReport("drift", float(d_hat), 0.0, float(d_se), n, params)]


# -------------------------------------------------------------- coupling test


def two_sample_report(check, a, b, params) -> McReport:
    """Difference of means of two independent samples against 0."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    se = np.sqrt(a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b))
    return McReport(check, float(a.mean() - b.mean()), 0.0, float(max(se, 1e-300)), len(a), params)


def coupling_test(variant: str = "chordal", resolution: int = 128, n: int = 2000, seed: int = 0,
                  probes=(1j, 2j, 1 + 1j), pairs=((0, 1), (0, 2), (1, 2), (0, 0), (2, 2)),
                  T: float = 1.0, dt: float = 2e-3, half_width: float = 4.0,
                  jump_factor: float = 1.0, threads: int = 1) -> list:
    """Curve-then-field (stage A) against field-only (stage B) sampling.

    Stage A: a chordal SLE_4 curve up to capacity time T cuts the box lattice,
    the cut carries +/- jump_factor lam and the far sides of the box carry the
    conditional continuum mean given the curve; one field is sampled.  Stage B
    samples the box field with the unconditioned boundary data.  Reports
    compare probe means and probe-pair covariances by two-sample z-scores.
    """
    if variant != "chordal":
        raise UnsupportedProfile("the lattice coupling test is implemented for chordal SLE_4")
    lam = LAMBDA
    probes = np.asarray(probes, dtype=complex)
    base = chordal_box(resolution, half_width, lam)
    ss = np.random.SeedSequence(seed)
    s_curve, s_a, s_b = ss.spawn(3)
    # stage B
    fb = base.value_at(base.sample(np.random.default_rng(s_b), n), probes)
    # stage A curves with the images of the far boundary nodes
    side = (base.kinds == FIXED) & (np.imag(base.points) > 0.5 * base.h)
    far = base.points[side]
    model = DrivingModel("chordal")
    curve_seed = int(s_curve.generate_state(1, np.uint64)[0] >> np.uint64(1))
    ens = simulate(model, far, T, dt, n, curve_seed, stop_radius=1e-9, record=True, threads=threads)
    rng_a = np.random.default_rng(s_a)
    fa = np.empty((n, len(probes)))
    for k in range(n):
        dp = DrivingPath(ens.times, ens.paths[k] + 0j)
        curve = trace_from_driving(half_plane(), dp)
        vals = base.values.copy()
        vals[side] = 2 * lam / np.pi * np.angle(ens.g[k] - ens.X[k]) - lam
        lat = replace(base, values=vals, _cache={}).with_slit(curve, jump_factor * lam)
        fa[k] = lat.value_at(lat.sample(rng_a, 1)[0], probes)
    params = {"variant": variant, "resolution": resolution, "T": T, "dt": dt, "seed": seed,
              "half_width": half_width, "jump_factor": jump_factor}
    reports = []
    for i, z in enumerate(probes):
        reports.append(two_sample_report("coupling:mean", fa[:, i], fb[:, i],
                                         dict(params, z=[z.real, z.imag])))
    for i, j in pairs:
        pa = (fa[:, i] - fa[:, i].mean()) * (fa[:, j] - fa[:, j].mean())
        pb = (fb[:, i] - fb[:, i].mean()) * (fb[:, j] - fb[:, j].mean())
        reports.append(two_sample_report("coupling:covariance", pa, pb,
                                         dict(params, z1=[probes[i].real, probes[i].imag],
                                              z2=[probes[j].real, probes[j].imag])))
    return reports


def level_line_curves(n: int, resolution: int = 128, half_width: float = 2.0, seed: int = 0,
                      radius: float | None = None, batch: int = 50) -> list:
    """Zero level lines of box DGFFs with chordal boundary data, cut at ``radius``."""
    lat = chordal_box(resolution, half_width)
    radius = 0.75 * half_width if radius is None else radius
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        for u in lat.sample(rng, min(batch, n - len(out))):
            c = level_line(u, lat.h, lat.origin, start=0j)
            out.append(truncate_curve(c, radius))
    return out
