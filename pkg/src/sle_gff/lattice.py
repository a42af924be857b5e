"""Finite-difference harmonic solves on rectangles in conformal coordinates.

The strip is used as is, the annulus through (log r, arg z) and the disc
through a Cartesian mask.  Since these coordinates are conformal, the plain
five-point Laplacian is the correct discretization.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import RegularGridInterpolator

from .domains import Dirichlet, DomainKind, DomainSpec, Neumann, RiemannHilbert
from .errors import SolverNonConvergence, UnsupportedProfile

UNKNOWN, FIXED, OUTSIDE, RH = 0, 1, 2, 3
RESIDUAL_TOL = 1e-10


def solve_rect(kinds, values, ha, hb, sides=("neumann",) * 4, periodic_b=False, rh_theta=0.0,
               source=None):
    """Solve the discrete Laplace equation on an (na, nb) node grid.

    kinds[i, j]: UNKNOWN, FIXED (Dirichlet value), OUTSIDE (edges dropped) or
    RH (top-row Riemann-Hilbert node, b = nb - 1).
    sides = (a_low, a_high, b_low, b_high): how out-of-range neighbours act,
    "neumann" mirrors across the edge node.  Dirichlet sides should be marked
    FIXED in ``kinds``.  ``source`` adds f to the right side of -Lap u = f;
    a stacked (na, nb, k) source solves k right sides with one factorization
    and returns an (na, nb, k) array.
    """
    kinds = np.asarray(kinds)
    na, nb = kinds.shape
    u = np.array(values, dtype=float, copy=True)
    idx = -np.ones((na, nb), dtype=np.int64)
    unk = (kinds == UNKNOWN) | (kinds == RH)
    idx[unk] = np.arange(unk.sum())
    n = int(unk.sum())
    if n == 0:
        return u
    wa, wb = 1.0 / ha**2, 1.0 / hb**2
    rows, cols, data = [], [], []
    rhs = np.zeros(n) if source is None else np.asarray(source, dtype=float)[unk].copy()
    multi = rhs.ndim == 2
    if multi:
        u = np.repeat(u[:, :, None], rhs.shape[1], axis=2)
    ii, jj = np.nonzero(kinds == UNKNOWN)
    r = idx[ii, jj]
    diag = np.zeros(n)
    for di, dj, w in ((1, 0, wa), (-1, 0, wa), (0, 1, wb), (0, -1, wb)):
        ni, nj = ii + di, jj + dj
        # out of range handling
        if di:
            side = sides[0] if di < 0 else sides[1]
            out = (ni < 0) | (ni >= na)
            if side == "neumann":
                ni = np.where(out, ii - di, ni)
                keep = np.ones_like(out)
            else:
                keep = ~out
        else:
            if periodic_b:
                nj = nj % nb
                keep = np.ones(len(ii), dtype=bool)
            else:
                side = sides[2] if dj < 0 else sides[3]
                out = (nj < 0) | (nj >= nb)
                if side == "neumann":
                    nj = np.where(out, jj - dj, nj)
                    keep = np.ones_like(out)
                else:
                    keep = ~out
        ni_c = np.clip(ni, 0, na - 1)
        nj_c = np.clip(nj, 0, nb - 1)
        k = kinds[ni_c, nj_c]
        keep = keep & (k != OUTSIDE)
        np.add.at(diag, r[keep], w)
        is_unk = keep & ((k == UNKNOWN) | (k == RH))
        rows.append(r[is_unk])
        cols.append(idx[ni_c[is_unk], nj_c[is_unk]])
        data.append(-w * np.ones(int(is_unk.sum())))
        is_fix = keep & (k == FIXED)
        np.add.at(rhs, r[is_fix], w * u[ni_c[is_fix], nj_c[is_fix]])
    rows.append(r)
    cols.append(r)
    data.append(diag[r])
    # Riemann-Hilbert rows on the top edge:
    # cos(pi theta) (u - u_below)/hb + sin(pi theta) (u_right - u_left)/(2 ha) = 0
    ri, rj = np.nonzero(kinds == RH)
    if len(ri):
        c, s = np.cos(np.pi * rh_theta), np.sin(np.pi * rh_theta)
        rr = idx[ri, rj]
        below = idx[ri, rj - 1]
        if np.any(below < 0):
            raise UnsupportedProfile("Riemann-Hilbert row needs unknown nodes below")
        rows += [rr, rr]
        cols += [rr, below]
        data += [np.full(len(rr), c / hb), np.full(len(rr), -c / hb)]
        for d, sgn in ((1, 1.0), (-1, -1.0)):
            nbr = np.clip(ri + d, 0, na - 1)
            # one-sided at the far ends
            edge = (ri + d < 0) | (ri + d >= na)
            nbr = np.where(edge, ri, nbr)
            k = kinds[nbr, rj]
            w = sgn * s / (2 * ha)
            unk_n = (k == UNKNOWN) | (k == RH)
            rows.append(rr[unk_n])
            cols.append(idx[nbr[unk_n], rj[unk_n]])
            data.append(np.full(int(unk_n.sum()), w))
            fix_n = k == FIXED
            np.add.at(rhs, rr[fix_n], -w * u[nbr[fix_n], rj[fix_n]])
    A = sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    sol = spla.spsolve(A.tocsc(), rhs)
    if multi and sol.ndim == 1:
        sol = sol[:, None]
    res = np.max(np.abs(A @ sol - rhs)) / max(1.0, np.max(np.abs(rhs)))
    if not np.all(np.isfinite(sol)) or res > RESIDUAL_TOL:
        raise SolverNonConvergence(f"relative residual {res:.2e}")
    u[unk] = sol
    return u


@dataclass
class LatticeField:
    """Solution sampled on a rectangular grid of conformal coordinates."""

    domain: DomainSpec
    a: np.ndarray
    b: np.ndarray
    values: np.ndarray

    def _coords(self, z):
        z = np.asarray(z, dtype=complex)
        kind = self.domain.kind
        if kind is DomainKind.STRIP:
            return z.real, z.imag
        if kind is DomainKind.ANNULUS:
            return np.log(np.abs(z)), np.mod(np.angle(z), 2 * np.pi)
        return z.real, z.imag

    def __call__(self, z):
        a, b = self._coords(z)
        vals = self.values
        bb = self.b
        if self.domain.kind is DomainKind.ANNULUS:
            # close the periodic direction for interpolation
            vals = np.concatenate([vals, vals[:, :1]], axis=1)
            bb = np.append(bb, 2 * np.pi)
        f = RegularGridInterpolator((self.a, bb), vals, method="linear")
        pts = np.stack([np.ravel(a), np.ravel(b)], axis=-1)
        return f(pts).reshape(np.shape(a))


def harmonic_solve(domain: DomainSpec, boundary_data, grid_resolution: int = 128,
                   secondary_data=None, half_width: float = 4 * np.pi) -> LatticeField:
    """Discrete harmonic extension of boundary data.

    boundary_data: callable on the primary boundary (real line parameter u for
    the strip, angle for the annulus and disc).  secondary_data: callable for a
    Dirichlet secondary piece (defaults to the constant in ``domain.secondary``).
    """
    if grid_resolution < 32:
        raise ValueError("grid_resolution must be at least 32")
    sec = domain.secondary
    if domain.kind is DomainKind.STRIP:
        nb = grid_resolution + 1
        hb = np.pi / grid_resolution
        na = int(round(2 * half_width / hb)) + 1
        a = np.linspace(-half_width, half_width, na)
        b = np.linspace(0, np.pi, nb)
        ha = a[1] - a[0]
        kinds = np.zeros((na, nb), dtype=int)
        vals = np.zeros((na, nb))
        kinds[:, 0] = FIXED
        vals[:, 0] = boundary_data(a)
        theta = 0.0
        if isinstance(sec, Dirichlet):
            kinds[:, -1] = FIXED
            vals[:, -1] = secondary_data(a) if secondary_data else sec.value
        elif isinstance(sec, RiemannHilbert):
            kinds[:, -1] = RH
            theta = sec.theta
        u = solve_rect(kinds, vals, ha, hb, sides=("neumann",) * 4, rh_theta=theta)
        return LatticeField(domain, a, b, u)
    if domain.kind is DomainKind.ANNULUS:
        p = domain.modulus
        nb = grid_resolution
        na = grid_resolution + 1
        a = np.linspace(-p, 0, na)
        b = np.arange(nb) * 2 * np.pi / nb
        kinds = np.zeros((na, nb), dtype=int)
        vals = np.zeros((na, nb))
        kinds[-1, :] = FIXED
        vals[-1, :] = boundary_data(b)
        if isinstance(sec, Dirichlet):
            kinds[0, :] = FIXED
            vals[0, :] = secondary_data(b) if secondary_data else sec.value
        elif not isinstance(sec, Neumann):
            raise UnsupportedProfile("annulus lattice supports Dirichlet or Neumann inner circles")
        u = solve_rect(kinds, vals, a[1] - a[0], b[1] - b[0], periodic_b=True)
        return LatticeField(domain, a, b, u)
    if domain.kind is DomainKind.DISC:
        n = grid_resolution
        a = np.linspace(-1, 1, n + 1)
        X, Y = np.meshgrid(a, a, indexing="ij")
        R = np.hypot(X, Y)
        kinds = np.where(R < 1, UNKNOWN, FIXED)
        vals = np.where(R < 1, 0.0, boundary_data(np.arctan2(Y, X)))
        u = solve_rect(kinds, vals, a[1] - a[0], a[1] - a[0], sides=("dirichlet",) * 4)
        return LatticeField(domain, a, a, u)
    raise UnsupportedProfile("harmonic_solve covers the strip, annulus and disc")


def annulus_green_lattice(p: float, inner, z1, z2, grid_resolution: int = 256) -> float:
    """Green's function of the annulus from a point source on the log-polar grid.

    The source is snapped to the nearest node; z1 is read off by interpolation.
    """
    na, nb = grid_resolution + 1, grid_resolution
    a = np.linspace(-p, 0, na)
    b = np.arange(nb) * 2 * np.pi / nb
    ha, hb = a[1] - a[0], b[1] - b[0]
    kinds = np.zeros((na, nb), dtype=int)
    kinds[-1, :] = FIXED
    if isinstance(inner, Dirichlet):
        kinds[0, :] = FIXED
    i2 = int(np.argmin(np.abs(a - np.log(abs(z2)))))
    j2 = int(np.argmin(np.abs(np.angle(np.exp(1j * (b - np.angle(z2)))))))
    src = np.zeros((na, nb))
    src[i2, j2] = 1.0 / (ha * hb)
    u = solve_rect(kinds, np.zeros((na, nb)), ha, hb, periodic_b=True, source=src)
    dom = DomainSpec(DomainKind.ANNULUS, modulus=p, secondary=inner)
    return float(LatticeField(dom, a, b, u)(z1))
