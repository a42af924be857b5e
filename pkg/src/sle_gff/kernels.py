"""Schwarz, Poisson and Green kernels in the canonical domains.

Closed forms are used in the half-plane, disc and strip.  Annulus kernels are
built by matching Fourier modes of the boundary data on both circles; the tail
is geometric in q = exp(-p) so the truncation is chosen from an explicit bound.
For thin annuli the same kernels are summed over images in log coordinates,
which converges like exp(-pi^2 k / p) instead.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .domains import (
    Dirichlet,
    DomainKind,
    DomainSpec,
    Neumann,
    RiemannHilbert,
)
from .errors import (
    CoincidentPoints,
    DomainMismatch,
    ExtrapolationDivergence,
    SingularEvaluation,
    TruncationFailure,
    UnsupportedProfile,
)

TWO_PI = 2.0 * np.pi
SINGULAR_TOL = 1e-12
N_MAX = 200_000
MODULAR_SWITCH = 2.0  # below this modulus the image sum is cheaper than the q-series


class KernelKind(str, enum.Enum):
    SCHWARZ = "schwarz"
    POISSON = "poisson"
    GREEN = "green"


class InnerBC(str, enum.Enum):
    DIRICHLET_CONST = "dirichlet-const"
    NEUMANN = "neumann"


@dataclass(frozen=True)
class KernelHandle:
    domain: DomainSpec
    kernel_kind: KernelKind = KernelKind.SCHWARZ
    tolerance: float = 1e-14
    series_truncation: int | None = None

    def __post_init__(self):
        if (self.domain.kind is DomainKind.ANNULUS and self.series_truncation is None
                and self.domain.modulus >= MODULAR_SWITCH):
            object.__setattr__(
                self, "series_truncation", annulus_truncation(self.domain.modulus, self.tolerance)
            )

    @property
    def theta(self) -> float:
        """Riemann-Hilbert angle of the strip top (Dirichlet top is theta = 1/2)."""
        sec = self.domain.secondary
        if isinstance(sec, RiemannHilbert):
            return sec.theta
        if isinstance(sec, Neumann):
            return 0.0
        return 0.5

    @property
    def inner_bc(self) -> InnerBC:
        sec = self.domain.secondary
        if isinstance(sec, Neumann):
            return InnerBC.NEUMANN
        if isinstance(sec, Dirichlet):
            return InnerBC.DIRICHLET_CONST
        raise UnsupportedProfile("annulus kernels support Dirichlet or Neumann inner circles")


def _check_gap(z, x):
    if np.any(np.abs(np.asarray(z) - np.asarray(x)) < SINGULAR_TOL):
        raise SingularEvaluation("evaluation point coincides with the pole")


# ---------------------------------------------------------------- closed forms


def schwarz_half_plane(x, z):
    return 1j / (np.pi * (z - x))


def schwarz_disc(x, z):
    return (x + z) / (TWO_PI * (x - z))


def schwarz_strip(theta, x, z):
    w = z - x
    return 1j * np.exp(theta * w) / (TWO_PI * np.sinh(w / 2))


def schwarz_strip_dz(theta, x, z):
    w = z - x
    s = np.sinh(w / 2)
    return 1j * np.exp(theta * w) * (theta - 0.5 * np.cosh(w / 2) / s) / (TWO_PI * s)


def schwarz_closed_form(domain: DomainSpec, theta: float, x, z):
    z = np.asarray(z, dtype=complex)
    _check_gap(z, x)
    kind = domain.kind
    if kind is DomainKind.HALF_PLANE:
        return schwarz_half_plane(x, z)
    if kind is DomainKind.DISC:
        return schwarz_disc(x, z)
    if kind is DomainKind.STRIP:
        return schwarz_strip(theta, x, z)
    raise DomainMismatch("annulus kernels have no closed form here; use schwarz_annulus")


# ------------------------------------------------------------------- annulus


def annulus_truncation(p: float, tol: float = 1e-14, n_max: int = N_MAX) -> int:
    """Smallest N with q^N / ((1-q)(1-q^2)) < tol."""
    q = np.exp(-p)
    denom = (1 - q) * (1 - q * q)
    n = int(np.ceil(np.log(tol * denom) / np.log(q)))
    n = max(n, 1)
    if n > n_max:
        raise TruncationFailure(f"modulus {p} needs {n} > {n_max} terms")
    return n


def _annulus_sums(p, bc, x, z, n_terms, deriv=False):
    """Correction to the disc kernel, Horner-evaluated.

    DIRICHLET_CONST: (1/pi) sum (u^n - v^n) / (1 - q^2n)
    NEUMANN:         (1/pi) sum (v^n - u^n) / (1 + q^2n)
    with u = q^2 conj(x) z, v = q^2 x / z.  With ``deriv`` also returns d/dz.
    """
    q2 = np.exp(-2 * p)
    x = np.asarray(x, dtype=complex)
    z = np.asarray(z, dtype=complex)
    u = q2 * np.conj(x) * z
    v = q2 * x / z
    n = np.arange(1, n_terms + 1)
    qn = q2**n
    if bc is InnerBC.DIRICHLET_CONST:
        coef = 1.0 / (1.0 - qn)
    else:
        coef = -1.0 / (1.0 + qn)
    su = np.zeros(np.broadcast(u, v).shape, dtype=complex)
    sv = np.zeros_like(su)
    du = np.zeros_like(su)
    dv = np.zeros_like(su)
    for k in range(n_terms - 1, -1, -1):
        su = (su + coef[k]) * u
        sv = (sv + coef[k]) * v
        if deriv:
            du = (du + coef[k] * n[k]) * u
            dv = (dv + coef[k] * n[k]) * v
    val = (su - sv) / np.pi
    if deriv:
        # d/dz u^n = n u^n / z, d/dz v^n = -n v^n / z
        return val, (du + dv) / (np.pi * z)
    return val


def _cot_csc(w):
    """cot and csc without overflow for large |Im w|."""
    sgn = np.where(w.imag >= 0, 1.0, -1.0)
    w = sgn * w  # now Im w >= 0
    e = np.exp(1j * w)
    E = e * e
    cot = 1j * (E + 1) / (E - 1)
    csc = 2j * e / (E - 1)
    return sgn * cot, sgn * csc


def _annulus_images(p, bc, x, z, tol, deriv=False):
    """Image sum in d = log(z/x), w = pi d / (2p), Y_k = pi^2 k / p.

    DIRICHLET_CONST: -(1/2p) sum_k cot(w - i Y_k) - d / (2 pi p)
    NEUMANN:         -(1/2p) sum_k csc(w - i Y_k)
    Images k and -k are summed in closed form:
      cot(w - iY) + cot(w + iY) = 2 sin 2w / (cosh 2Y - cos 2w)
      csc(w - iY) + csc(w + iY) = 4 sin w cosh Y / (cosh 2Y - cos 2w)
    """
    x = np.asarray(x, dtype=complex)
    z = np.asarray(z, dtype=complex)
    d = np.log(z / x)
    c = np.pi / (2 * p)
    w = c * d
    cot, csc = _cot_csc(w)
    dirichlet = bc is InnerBC.DIRICHLET_CONST
    if dirichlet:
        acc = cot.copy()
        dacc = csc * csc if deriv else None
    else:
        acc = csc.copy()
        dacc = cot * csc if deriv else None
    # |Im 2w| <= pi^2/p; pairs are below exp(-pi^2/p) relative and vanish in
    # double precision before cos 2w overflows
    if np.pi**2 / p < 700:
        rate = np.pi**2 / p * (2 if dirichlet else 1)
        K = int(np.ceil(np.log(4 / tol) / rate))
        Y = np.pi**2 / p * np.arange(1, K + 1)
        Y = Y[2 * Y < 700]
        if len(Y):
            s1, c1 = np.sin(w), np.cos(w)
            s2, c2 = 2 * s1 * c1, 1 - 2 * s1 * s1
            for y in Y:
                C = np.cosh(2 * y)
                den = C - c2
                if dirichlet:
                    acc += 2 * s2 / den
                    if deriv:
                        dacc -= 4 * (C * c2 - 1) / den / den  # den**2 would overflow
                else:
                    ch = np.cosh(y)
                    acc += 4 * s1 * ch / den
                    if deriv:
                        dacc -= 4 * ch * (c1 * den - 2 * s1 * s2) / den / den
    val = -acc / (2 * p)
    if dirichlet:
        val = val - d / (TWO_PI * p)
    if not deriv:
        return val
    dd = c * dacc / (2 * p)
    if dirichlet:
        dd = dd - 1 / (TWO_PI * p)
    return val, dd / z


def schwarz_annulus(p, bc, x, z, n_terms=None, tol=1e-14):
    """Schwarz kernel of A_p = {e^-p < |z| < 1} with unit mass at x on the outer circle.

    DIRICHLET_CONST: Re = 1/(2 pi) on the inner circle.
    NEUMANN: Im constant on the inner circle.
    Without an explicit n_terms, thin annuli (p < MODULAR_SWITCH) use the image sum.
    """
    bc = InnerBC(bc)
    z = np.asarray(z, dtype=complex)
    _check_gap(z, x)
    if n_terms is None and p < MODULAR_SWITCH:
        return _annulus_images(p, bc, x, z, tol)
    n_terms = n_terms or annulus_truncation(p, tol)
    return schwarz_disc(x, z) + _annulus_sums(p, bc, x, z, n_terms)


def schwarz_annulus_dz(p, bc, x, z, n_terms=None, tol=1e-14):
    bc = InnerBC(bc)
    z = np.asarray(z, dtype=complex)
    _check_gap(z, x)
    if n_terms is None and p < MODULAR_SWITCH:
        return _annulus_images(p, bc, x, z, tol, deriv=True)[1]
    n_terms = n_terms or annulus_truncation(p, tol)
    _, d = _annulus_sums(p, bc, x, z, n_terms, deriv=True)
    return x / (np.pi * (x - z) ** 2) + d


def schwarz_annulus_inverted(p, y, z, n_terms=None, tol=1e-14):
    """Kernel with unit mass at y on the inner circle, Re = 1/(2 pi) on the outer one."""
    r = np.exp(-p)
    z = np.asarray(z, dtype=complex)
    return schwarz_annulus(p, InnerBC.DIRICHLET_CONST, r / np.asarray(y), r / z, n_terms, tol)


def schwarz_annulus_inverted_dz(p, y, z, n_terms=None, tol=1e-14):
    r = np.exp(-p)
    z = np.asarray(z, dtype=complex)
    d = schwarz_annulus_dz(p, InnerBC.DIRICHLET_CONST, r / np.asarray(y), r / z, n_terms, tol)
    return d * (-r / z**2)


def schwarz_eval(handle: KernelHandle, x, z):
    dom = handle.domain
    if dom.kind is DomainKind.ANNULUS:
        return schwarz_annulus(
            dom.modulus, handle.inner_bc, x, z, handle.series_truncation, handle.tolerance
        )
    return schwarz_closed_form(dom, handle.theta, x, z)


def schwarz_dz(handle: KernelHandle, x, z):
    dom = handle.domain
    z = np.asarray(z, dtype=complex)
    if dom.kind is DomainKind.ANNULUS:
        return schwarz_annulus_dz(
            dom.modulus, handle.inner_bc, x, z, handle.series_truncation, handle.tolerance
        )
    if dom.kind is DomainKind.HALF_PLANE:
        return -1j / (np.pi * (z - x) ** 2)
    if dom.kind is DomainKind.DISC:
        return x / (np.pi * (x - z) ** 2)
    return schwarz_strip_dz(handle.theta, x, z)


# ------------------------------------------------------------------- poisson


def poisson_eval(handle: KernelHandle, x, z):
    dom = handle.domain
    s = schwarz_eval(handle, x, z)
    if dom.kind is DomainKind.ANNULUS and handle.inner_bc is InnerBC.DIRICHLET_CONST:
        # remove the constant 1/(2 pi) on the inner circle
        return np.real(s + np.log(np.asarray(z, dtype=complex)) / (TWO_PI * dom.modulus))
    return np.real(s)


# ----------------------------------------------------------------------- mu


def _neville(hs, vals):
    """Polynomial extrapolation to h = 0; returns the tableau diagonal."""
    n = len(hs)
    t = [list(vals)]
    for k in range(1, n):
        prev = t[-1]
        row = []
        for i in range(n - k):
            h0, h1 = hs[i], hs[i + k]
            row.append((h1 * prev[i] - h0 * prev[i + 1]) / (h1 - h0))
        t.append(row)
    return [r[0] for r in t]


def kernel_mu(handle: KernelHandle, x, eps0: float = 0.05, levels: int = 6):
    """Constant term in the expansion of the Schwarz kernel at x.

    Half-plane / strip: S = i/(pi(z-x)) + i mu/pi + o(1), returns mu.
    Disc / annulus: S = -x/(pi(z-x)) + c + o(1), returns Re c.
    """
    dom = handle.domain
    n_in = dom.inward_normal(x)
    hs = [eps0 / 2**k for k in range(levels)]
    vals = []
    for h in hs:
        z = x + h * n_in
        s = complex(schwarz_eval(handle, x, z))
        if dom.kind in (DomainKind.HALF_PLANE, DomainKind.STRIP):
            vals.append(((s - 1j / (np.pi * (z - x))) * np.pi / 1j).real)
        else:
            vals.append((s + x / (np.pi * (z - x))).real)
    diag = _neville(hs, vals)
    steps = np.abs(np.diff(diag))
    if len(steps) > 2 and not (steps[-1] <= 10 * steps[1] + 1e-12):
        raise ExtrapolationDivergence(f"extrapolation of the constant term does not contract: {steps}")
    return float(diag[-1])


# -------------------------------------------------------------------- greens


def green_half_plane(z1, z2):
    return -np.log(np.abs((z1 - z2) / (z1 - np.conj(z2)))) / TWO_PI


def green_disc(z1, z2):
    return -np.log(np.abs((z1 - z2) / (1 - z1 * np.conj(z2)))) / TWO_PI


def green_strip(z1, z2):
    return green_half_plane(np.exp(z1), np.exp(z2))


def green_strip_neumann_top(z1, z2):
    """Dirichlet on the real line, Neumann on the top line R + i pi."""
    a, b = np.exp(z1 / 2), np.exp(z2 / 2)
    num = (a - b) * (a + np.conj(b))
    den = (a - np.conj(b)) * (a + b)
    return -np.log(np.abs(num / den)) / TWO_PI


def green_annulus(p, bc, z1, z2, tol=1e-15, n_max=N_MAX):
    """Green's function of A_p, Dirichlet outside, Dirichlet or Neumann inside.

    Normalized so that G ~ -(1/2 pi) log|z1 - z2| at the diagonal.
    """
    bc = InnerBC(bc)
    z1 = np.asarray(z1, dtype=complex)
    z2 = np.asarray(z2, dtype=complex)
    s1, s2 = np.log(np.abs(z1)), np.log(np.abs(z2))
    lo, hi = np.minimum(s1, s2), np.maximum(s1, s2)
    d = hi - lo
    sig = lo + hi
    dphi = np.angle(z1) - np.angle(z2)
    # slowest geometric rate among the four exponentials
    rate = np.max(np.maximum.reduce([np.exp(sig), np.exp(-2 * p - sig), np.exp(-p) * np.ones_like(sig)]))
    if rate >= 1:
        raise SingularEvaluation("point on the boundary")
    n_terms = int(np.ceil(np.log(tol * (1 - rate)) / np.log(rate))) + 1
    if n_terms > n_max:
        raise TruncationFailure(f"green series needs {n_terms} terms")
    total = np.zeros(np.broadcast(s1, s2).shape)
    if bc is InnerBC.DIRICHLET_CONST:
        total = total - lo * hi / p
    for n in range(1, n_terms + 1):
        Q = np.exp(-2 * n * p)
        emd, epd = np.exp(-n * d), np.exp(n * d)
        eps, ems = np.exp(n * sig), np.exp(-n * sig)
        if bc is InnerBC.DIRICHLET_CONST:
            c = (Q * emd - eps - Q * ems + Q * epd) / (2 * n * (1 - Q))
        else:
            c = (-Q * emd - eps + Q * ems - Q * epd) / (2 * n * (1 + Q))
        total = total + 2 * c * np.cos(n * dphi)
    return (-np.log(np.abs(z1 - z2)) + total) / TWO_PI


def greens_eval(handle: KernelHandle, z1, z2):
    z1 = np.asarray(z1, dtype=complex)
    z2 = np.asarray(z2, dtype=complex)
    if np.any(np.abs(z1 - z2) < SINGULAR_TOL):
        raise CoincidentPoints("Green's function evaluated on the diagonal")
    dom = handle.domain
    sec = dom.secondary
    if dom.kind is DomainKind.HALF_PLANE:
        return green_half_plane(z1, z2)
    if dom.kind is DomainKind.DISC:
        return green_disc(z1, z2)
    if dom.kind is DomainKind.STRIP:
        if isinstance(sec, Dirichlet):
            return green_strip(z1, z2)
        if isinstance(sec, Neumann):
            return green_strip_neumann_top(z1, z2)
        raise UnsupportedProfile("no Green's function backend for a Riemann-Hilbert strip top")
    return green_annulus(dom.modulus, handle.inner_bc, z1, z2)
