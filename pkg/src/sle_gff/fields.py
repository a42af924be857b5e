"""Mean and covariance of the coupled field, and their derivatives.

Every variant is described by an analytic function F with mean M = Im F.
Evaluations take the image point g, the lifted driving value X (an angle on
circles), the lifted marked points and the time t; the remaining modulus is
``modulus - t`` on the annulus.

Multivalued means are returned as *pieces* ``(values, period)``: each piece
is correct modulo its period and is made continuous in time by
:class:`BranchTracker`, which keeps the branch that changes least per step.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import hyp2f1

from .domains import LAMBDA, DomainKind, alpha_kappa, lambda_kappa
from .errors import DomainMismatch, UnsupportedProfile
from .kernels import (
    InnerBC,
    annulus_truncation,
    green_annulus,
    green_disc,
    green_half_plane,
    green_strip,
    green_strip_neumann_top,
    schwarz_annulus,
    schwarz_annulus_dz,
    schwarz_annulus_inverted,
    schwarz_disc,
    schwarz_strip,
    schwarz_strip_dz,
)
from .sle import DrivingModel, Variant

TWO_PI = 2 * np.pi
DIRICHLET = InnerBC.DIRICHLET_CONST
NEUMANN = InnerBC.NEUMANN


# ---------------------------------------------------------- annulus helpers


def _series(coef, u):
    """sum_n coef[n-1] u^n / n by Horner."""
    acc = np.zeros_like(u)
    for k in range(len(coef) - 1, -1, -1):
        acc = (acc + coef[k] / (k + 1)) * u
    return acc


def _arc_log_change(z, a, b):
    """Change of log(e^{i theta} - z) for theta from a to b, |z| < 1.

    arg(e^{i theta} - z) increases monotonically with theta and by exactly
    2 pi per turn, which fixes the branch.
    """
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    sgn = np.where(b >= a, 1.0, -1.0)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    turns = np.floor((hi - lo) / TWO_PI)
    wl, wh = np.exp(1j * lo) - z, np.exp(1j * hi) - z
    part = np.mod(np.angle(wh / wl), TWO_PI)
    # a partial arc of zero length must not read as a full turn
    part = np.where((hi - lo) - TWO_PI * turns < 1e-15, 0.0, part)
    phi = TWO_PI * turns + part
    return sgn * (np.log(np.abs(wh)) - np.log(np.abs(wl)) + 1j * phi)


def arc_integral(m, a, b, z, tol=1e-13):
    """int_a^b S^m_{e^{i theta}}(z) d theta for the Dirichlet-constant kernel.

    Disc part by a continuous logarithm, correction by its termwise
    antiderivative (i/pi) sum c_n (u^n + v^n) / n, u = q^2 e^{-i theta} z,
    v = q^2 e^{i theta} / z.
    """
    z = np.asarray(z, dtype=complex)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    val = _arc_log_change(z, a, b) / (1j * np.pi) - (b - a) / TWO_PI
    n = annulus_truncation(m, tol)
    q2 = np.exp(-2 * m)
    coef = 1.0 / (1.0 - q2 ** np.arange(1, n + 1))

    def ant(th):
        return _series(coef, q2 * np.exp(-1j * th) * z) + _series(coef, q2 * np.exp(1j * th) / z)

    return val + 1j / np.pi * (ant(b) - ant(a))


def inverted_arc_integral(m, beta, z, tol=1e-13):
    """int_0^beta S^inv_{e^{i theta - m}}(z) d theta."""
    zeta = np.exp(-m) / np.asarray(z, dtype=complex)
    return -arc_integral(m, 0.0, -np.asarray(beta, float), zeta, tol)


def neumann_potential(m, z_over_x, lam=LAMBDA, tol=1e-13):
    """G with dG/dz = -2 lam S~/z: jump -2 lam at x = 1, Neumann inner circle.

    m = inf gives the disc potential (lam/pi)(2 log(1 - w) - log w).
    """
    w = np.asarray(z_over_x, dtype=complex)
    val = lam / np.pi * (2 * np.log(1 - w) - np.log(w))
    if np.isfinite(m):
        n = annulus_truncation(m, tol)
        q2 = np.exp(-2 * m)
        q2n = q2 ** np.arange(1, n + 1)
        coef = 1.0 / (1.0 + q2n)
        val = val + 2 * lam / np.pi * (_series(coef, q2 * w) + _series(coef, q2 / w))
    return val


def jump_base_potential(m, z, lam=LAMBDA, tol=1e-13):
    """Jump -2 lam at angle 0 on both circles, monodromy -2 lam.

    Fixed by requiring the full jump-variant potential to be rotation
    invariant: dF/dz = -(2 lam / z)(S_1 + S^inv_{e^-m} - 1/(2 pi)).
    """
    z = np.asarray(z, dtype=complex)
    r = np.exp(-m)
    val = lam / np.pi * (np.log(z) + 2 * np.log(1 - z) - 2 * np.log(z - r))
    n = annulus_truncation(m, tol)
    qn = r ** np.arange(1, n + 1)
    coef = 1.0 / (1.0 + qn)
    val = val + 2 * lam / np.pi * (_series(coef, r * z) - _series(coef * qn, r / z))
    return val


# ------------------------------------------------------------ field model


@dataclass(frozen=True)
class FieldModel:
    """Mean/covariance of the field coupled with a driving model.

    ``lam`` is the kappa = 4 half jump; for kappa != 4 the kappa = 4 potential
    is scaled by sqrt(4/kappa) and a winding term alpha_kappa arg g' (minus
    alpha_kappa arg g on the annulus) is added.  ``mean_backend`` is
    "closed-form" except for strip profiles served by the lattice.
    """

    driving: DrivingModel
    lam: float = LAMBDA
    tol: float = 1e-13
    mean_backend: str = "closed-form"
    branch_state: dict = field(default_factory=dict, compare=False)

    # ------------------------------------------------------------ basics
    @property
    def variant(self) -> Variant:
        return self.driving.effective

    @property
    def kappa(self) -> float:
        return self.driving.kappa

    @property
    def domain(self):
        return self.driving.domain

    @property
    def scale(self) -> float:
        return float(np.sqrt(4.0 / self.kappa))

    @property
    def lambda_kappa(self) -> float:
        return lambda_kappa(self.kappa)

    @property
    def extra_jumps(self) -> tuple:
        """Half jumps at the marked points (rho lam / 2 per force point)."""
        v = self.variant
        if v in (Variant.CHORDAL_RHO, Variant.ANNULUS_NEUMANN_RHO):
            return tuple(r * self.lam / 2 for r in self.driving.rho)
        return ()

    def modulus_left(self, t):
        p = self.driving.modulus
        return None if p is None else p - t

    def _check_kappa(self):
        if self.kappa != 4.0 and self.driving.variant is not Variant.DIRICHLET_GENERAL_KAPPA \
                and self.variant not in (Variant.CHORDAL, Variant.STRIP_THETA, Variant.DIPOLAR):
            raise UnsupportedProfile(f"{self.variant.value} is coupled at kappa = 4 only")

    # --------------------------------------------------- kappa = 4 potential
    def potential(self, z, X, mk, t=0.0):
        """F at kappa = 4 (principal branches, lifts where they matter)."""
        z = np.asarray(z, dtype=complex)
        X = np.asarray(X, dtype=float)
        mk = np.asarray(mk, dtype=float)
        lam = self.lam
        v = self.variant
        m = self.modulus_left(t)
        if v in (Variant.CHORDAL, Variant.CHORDAL_RHO):
            F = 2 * lam / np.pi * np.log(z - X) - 1j * lam
            for j, lj in enumerate(self.extra_jumps):
                F = F + 2 * lj / np.pi * np.log(z - mk[..., j])
            return F
        if v is Variant.RADIAL:
            return neumann_potential(np.inf, z / np.exp(1j * X), lam, self.tol)
        if v in (Variant.DIPOLAR, Variant.STRIP_THETA):
            theta = self.driving.theta if v is Variant.STRIP_THETA else 0.0
            return strip_rh_potential(theta, z - X, lam)
        if v is Variant.STRIP_MULTI:
            return self._strip_multi_potential(z, X, mk)
        if v in (Variant.ANNULUS_STANDARD, Variant.ANNULUS_NEUMANN_RHO):
            F = neumann_potential(m, z / np.exp(1j * X), lam, self.tol)
            for j, lj in enumerate(self.extra_jumps):
                F = F + neumann_potential(m, z / np.exp(1j * mk[..., j]), lj, self.tol)
            return F
        if v is Variant.ANNULUS_DIRICHLET:
            return self._annulus_dirichlet_potential(z, X, mk[..., 0], m)
        if v is Variant.ANNULUS_INNER:
            return self._annulus_jump_potential(z, X, mk[..., 0], m)
        raise UnsupportedProfile(v)

    def _strip_multi_potential(self, z, X, mk):
        lam = self.lam
        if self.driving.neumann_top:
            return strip_rh_potential(0.0, z - X, lam)
        c = self.driving.top_levels
        F = 2 * lam / np.pi * np.log(np.expm1(z - X)) - 1j * lam + (c[0] - lam) / np.pi * z
        for j in range(len(c) - 1):
            F = F + (c[j + 1] - c[j]) / np.pi * np.log(np.exp(z) + np.exp(mk[..., j]))
        return F

    def _annulus_dirichlet_potential(self, z, al, be, m):
        lam, mu = self.lam, self.driving.mu_inner
        ell = np.mod(be - al, TWO_PI)
        I1 = arc_integral(m, al, al + ell, z, self.tol)
        I2 = arc_integral(m, al + ell, al + TWO_PI, z, self.tol)
        logzx = np.log(z) - 1j * al
        return -1j * lam * I1 + 1j * lam * I2 - 1j * logzx / m * (mu - lam * (np.pi - ell) / np.pi)

    def _annulus_jump_potential(self, z, al, be, m):
        lam = self.lam
        logzx = np.log(z) - 1j * al
        tp = -m
        F = jump_base_potential(m, z, lam, self.tol)
        F = F + 2j * lam * arc_integral(m, 0.0, al, z, self.tol)
        F = F + 2j * lam * inverted_arc_integral(m, be, z, self.tol)
        F = F - 2j * lam * logzx * al / (TWO_PI * tp)
        F = F - 2j * lam * (tp - logzx) * be / (TWO_PI * tp)
        return F

    def periods(self) -> tuple:
        """Periods of the kappa = 4 mean pieces (None: single valued)."""
        v = self.variant
        if v is Variant.RADIAL or v is Variant.ANNULUS_STANDARD:
            return (2 * self.lam,)
        if v is Variant.ANNULUS_NEUMANN_RHO:
            return (2 * self.lam,) + tuple(2 * abs(lj) for lj in self.extra_jumps)
        if v is Variant.ANNULUS_INNER:
            return (2 * self.lam,)
        return (None,)

    def potential_pieces(self, z, X, mk, t=0.0):
        """Im of the kappa = 4 potential split by period, stacked on the last axis."""
        if self.variant is Variant.ANNULUS_NEUMANN_RHO:
            z = np.asarray(z, dtype=complex)
            m = self.modulus_left(t)
            parts = [neumann_potential(m, z / np.exp(1j * np.asarray(X)), self.lam, self.tol)]
            for j, lj in enumerate(self.extra_jumps):
                parts.append(neumann_potential(m, z / np.exp(1j * np.asarray(mk)[..., j]), lj, self.tol))
            return np.stack([p.imag for p in parts], axis=-1)
        return np.asarray(self.potential(z, X, mk, t)).imag[..., None]

    # ------------------------------------------------------- derivatives
    def f_derivative_x(self, z, X, mk, t=0.0):
        """dF/dx at kappa = 4 (x: boundary length at the driving point)."""
        z = np.asarray(z, dtype=complex)
        X = np.asarray(X, dtype=float)
        lam, v = self.lam, self.variant
        m = self.modulus_left(t)
        if v in (Variant.CHORDAL, Variant.CHORDAL_RHO):
            return -2 * lam / np.pi / (z - X)
        if v is Variant.RADIAL:
            return 2j * lam * schwarz_disc(np.exp(1j * X), z)
        if v in (Variant.DIPOLAR, Variant.STRIP_THETA):
            return 2j * lam * schwarz_strip(self._theta, X, z)
        if v is Variant.STRIP_MULTI:
            if self.driving.neumann_top:
                return 2j * lam * schwarz_strip(0.0, X, z)
            e = np.exp(z - X)
            return -2 * lam / np.pi * e / (e - 1)
        x = np.exp(1j * X)
        if v in (Variant.ANNULUS_STANDARD, Variant.ANNULUS_NEUMANN_RHO):
            return 2j * lam * schwarz_annulus(m, NEUMANN, x, z, tol=self.tol)
        S = schwarz_annulus(m, DIRICHLET, x, z, tol=self.tol)
        return 2j * lam * (S + self._R1(z, X, np.asarray(mk)[..., 0], m))

    def _R1(self, z, al, be, m):
        tp = -m
        logzx = np.log(z) - 1j * al
        if self.variant is Variant.ANNULUS_DIRICHLET:
            ell = np.mod(be - al, TWO_PI)
            mu = self.driving.mu_inner
            return (-1j * mu / (2 * self.lam) + 1j * (np.pi - ell) / TWO_PI - logzx / TWO_PI) / tp
        return -logzx / (TWO_PI * tp) + 1j * (al - be) / (TWO_PI * tp)

    @property
    def _theta(self):
        return self.driving.theta if self.variant is Variant.STRIP_THETA else 0.0

    def f_derivative_xx(self, z, X, mk, t=0.0):
        z = np.asarray(z, dtype=complex)
        X = np.asarray(X, dtype=float)
        lam, v = self.lam, self.variant
        m = self.modulus_left(t)
        if v in (Variant.CHORDAL, Variant.CHORDAL_RHO):
            return -2 * lam / np.pi / (z - X) ** 2
        if v is Variant.RADIAL:
            x = np.exp(1j * X)
            return 2 * lam * z * x / (np.pi * (x - z) ** 2)
        if v in (Variant.DIPOLAR, Variant.STRIP_THETA) or (v is Variant.STRIP_MULTI and self.driving.neumann_top):
            return -2j * lam * schwarz_strip_dz(self._theta, X, z)
        if v is Variant.STRIP_MULTI:
            e = np.exp(z - X)
            return -2 * lam / np.pi * e / (e - 1) ** 2
        x = np.exp(1j * X)
        if v in (Variant.ANNULUS_STANDARD, Variant.ANNULUS_NEUMANN_RHO):
            return 2 * lam * z * schwarz_annulus_dz(m, NEUMANN, x, z, tol=self.tol)
        dS = -1j * z * schwarz_annulus_dz(m, DIRICHLET, x, z, tol=self.tol)
        return 2j * lam * (dS + 1j / (np.pi * -m))

    def f_derivative_z(self, z, X, mk, t=0.0):
        z = np.asarray(z, dtype=complex)
        X = np.asarray(X, dtype=float)
        mk = np.asarray(mk, dtype=float)
        lam, v = self.lam, self.variant
        m = self.modulus_left(t)
        if v in (Variant.CHORDAL, Variant.CHORDAL_RHO):
            d = 2 * lam / np.pi / (z - X)
            for j, lj in enumerate(self.extra_jumps):
                d = d + 2 * lj / np.pi / (z - mk[..., j])
            return d
        if v is Variant.RADIAL:
            return -2 * lam * schwarz_disc(np.exp(1j * X), z) / z
        if v in (Variant.DIPOLAR, Variant.STRIP_THETA) or (v is Variant.STRIP_MULTI and self.driving.neumann_top):
            return -self.f_derivative_x(z, X, mk, t)
        if v is Variant.STRIP_MULTI:
            c = self.driving.top_levels
            d = -self.f_derivative_x(z, X, mk, t) + (c[0] - lam) / np.pi
            for j in range(len(c) - 1):
                ea = np.exp(mk[..., j])
                d = d + (c[j + 1] - c[j]) / np.pi * np.exp(z) / (np.exp(z) + ea)
            return d
        x = np.exp(1j * X)
        if v in (Variant.ANNULUS_STANDARD, Variant.ANNULUS_NEUMANN_RHO):
            d = -2 * lam * schwarz_annulus(m, NEUMANN, x, z, tol=self.tol) / z
            for j, lj in enumerate(self.extra_jumps):
                d = d - 2 * lj * schwarz_annulus(m, NEUMANN, np.exp(1j * mk[..., j]), z, tol=self.tol) / z
            return d
        al, be = X, mk[..., 0]
        tp = -m
        Sx = schwarz_annulus(m, DIRICHLET, x, z, tol=self.tol)
        if v is Variant.ANNULUS_DIRICHLET:
            ell = np.mod(be - al, TWO_PI)
            S1 = schwarz_annulus(m, DIRICHLET, np.exp(1j * be), z, tol=self.tol)
            mu = self.driving.mu_inner
            return 2 * lam / z * (S1 - Sx) + 1j * (mu - lam * (np.pi - ell) / np.pi) / (tp * z)
        if v is Variant.ANNULUS_INNER:
            Si = schwarz_annulus_inverted(m, np.exp(-m + 1j * be), z, tol=self.tol)
            return -2 * lam / z * (Sx + Si - 1 / TWO_PI + 1j * (al - be) / (TWO_PI * tp))
        raise UnsupportedProfile(v)

    # ------------------------------------------------------ kappa general
    def mean_pieces(self, g, X, mk, t=0.0, log_deriv=None, multivalued=None):
        """Mean pieces (stacked on the last axis) and their periods at this kappa.

        ``multivalued`` True/False restricts to pieces with/without a period.
        """
        self._check_kappa()
        s = self.scale
        g = np.asarray(g, dtype=complex)
        base_per = [None if p is None else s * p for p in self.periods()]
        vals, per = [], []
        if multivalued is None or multivalued == any(p is not None for p in base_per):
            b = s * self.potential_pieces(g, X, mk, t)
            vals += [b[..., k] for k in range(b.shape[-1])]
            per += base_per
        if self.kappa != 4.0:
            if self.variant in (Variant.STRIP_THETA, Variant.DIPOLAR):
                raise UnsupportedProfile("strip means at kappa != 4 need the path functional "
                                         "strip_history_term")
            a = alpha_kappa(self.kappa)
            if multivalued is not True:
                if log_deriv is not None:
                    vals.append(a * np.asarray(log_deriv).imag)
                    per.append(None)
                elif np.any(np.asarray(t) != 0):
                    raise UnsupportedProfile("kappa != 4 needs log g'")
            if self.domain.kind is DomainKind.ANNULUS and multivalued is not False:
                vals.append(-a * np.angle(g))
                per.append(TWO_PI * abs(a))
        if not vals:
            return np.zeros(g.shape + (0,)), []
        vals = [np.broadcast_to(v, np.broadcast(*vals).shape) for v in vals]
        return np.stack(vals, axis=-1), per

    def mean(self, g, X, mk, t=0.0, log_deriv=None):
        """Mean on the principal branch (correct modulo the monodromy)."""
        vals, _ = self.mean_pieces(g, X, mk, t, log_deriv)
        return vals.sum(axis=-1)

    def covariance(self, g1, g2, t=0.0):
        """Green's function of the remaining domain at the image points."""
        v = self.variant
        kind = self.domain.kind
        if kind is DomainKind.HALF_PLANE:
            return green_half_plane(g1, g2)
        if kind is DomainKind.DISC:
            return green_disc(g1, g2)
        if kind is DomainKind.STRIP:
            if v is Variant.DIPOLAR or (v is Variant.STRIP_THETA and self.driving.theta == 0.0) \
                    or (v is Variant.STRIP_MULTI and self.driving.neumann_top):
                return green_strip_neumann_top(g1, g2)
            if v is Variant.STRIP_MULTI:
                return green_strip(g1, g2)
            raise UnsupportedProfile("no closed-form Green's function for this strip profile")
        bc = NEUMANN if v in (Variant.ANNULUS_STANDARD, Variant.ANNULUS_NEUMANN_RHO) else DIRICHLET
        return green_annulus(self.modulus_left(t), bc, g1, g2)

    # --------------------------------------------------------- utilities
    def monodromy(self, radius=None, n=4096):
        """Change of the mean along a ccw loop around the hole at t = 0."""
        self._check_kappa()
        if self.domain.kind is not DomainKind.ANNULUS and self.variant is not Variant.RADIAL:
            return 0.0
        if radius is not None:
            r = radius
        elif self.variant is Variant.RADIAL:
            r = 0.5
        else:
            r = np.exp(-self.driving.modulus / 2)
        th = np.arange(n) * TWO_PI / n
        z = r * np.exp(1j * th)
        X = np.angle(self.driving.start)
        mk = self.driving.marked_lift()
        dF = self.f_derivative_z(z, X, mk, 0.0)
        # dM = Im(F' dz), dz = i z d theta; the trapezoid rule is spectral here
        loop = np.sum((dF * 1j * z).imag) * TWO_PI / n
        total = self.scale * loop
        if self.kappa != 4.0 and self.domain.kind is DomainKind.ANNULUS:
            total -= TWO_PI * alpha_kappa(self.kappa)
        return float(total)


def strip_rh_potential(theta, w, lam=LAMBDA):
    """F(w), w = z - x, with dF/dz = (lam/pi) e^{theta w} / sinh(w/2).

    Bottom values +lam left of x and -lam right of x; the top carries the
    Riemann-Hilbert condition of slope theta.  With u = e^w and a = theta + 1/2,
    F = -(2 lam/pi) (u^a/a) 2F1(a, 1; a + 1; u) + i lam.
    """
    w = np.asarray(w, dtype=complex)
    a = theta + 0.5
    if theta == 0.0:
        # 2F1(1/2, 1; 3/2; u) = artanh(sqrt u) / sqrt u
        s = np.exp(w / 2)
        return -2 * lam / np.pi * np.log((1 + s) / (1 - s)) + 1j * lam
    u = np.exp(w)
    # the Euler transformation keeps the argument u/(u - 1) off the cut for Im u > 0
    y = u / (u - 1)
    phi = (u ** a / a) * (1 - u) ** -1 * hyp2f1(1, 1, a + 1, y)
    return -2 * lam / np.pi * phi + 1j * lam


def mean_kappa_rescale(model: DrivingModel, kappa: float) -> FieldModel:
    """Field for the same boundary profile at another kappa (annulus-wrapped kappa = 4 potential)."""
    base = model.effective
    if base is Variant.CHORDAL:
        return FieldModel(DrivingModel(Variant.CHORDAL, kappa=kappa, x0=model.x0))
    wrapped = DrivingModel(Variant.DIRICHLET_GENERAL_KAPPA, kappa=kappa, base=base, marked=model.marked,
                           mu_inner=model.mu_inner, winding_branch=model.winding_branch,
                           modulus=model.modulus, rho=model.rho, x0=model.x0)
    return FieldModel(wrapped)


def winding_correction(field: FieldModel, g, log_deriv):
    """Im of the kappa != 4 correction: alpha (arg g' [- arg g on the annulus])."""
    a = alpha_kappa(field.kappa)
    out = a * np.asarray(log_deriv).imag
    if field.domain.kind is DomainKind.ANNULUS:
        out = out - a * np.angle(g)
    return out


def strip_history_rate(field: FieldModel, X, g):
    """d/dt of the strip correction E_t: (4 - kappa) lam_kappa i d_x S~_X(g)."""
    k = field.kappa
    return (4 - k) * lambda_kappa(k) * 1j * -schwarz_strip_dz(field._theta, X, g)


def strip_history_term(field: FieldModel, times, X, g_path):
    """Trapezoid integral of the strip correction along a sampled path."""
    rate = strip_history_rate(field, np.asarray(X)[:, None], np.asarray(g_path))
    return np.trapezoid(rate, times, axis=0)


# ------------------------------------------------------------- branches


class BranchTracker:
    """Follows the multivalued mean pieces along paths.

    Each path keeps its last values; a new evaluation is shifted by the
    multiple of the period that changes it least.
    """

    def __init__(self, field: FieldModel, z0, n_paths):
        self.field = field
        self.nz = len(np.atleast_1d(z0))
        self.n = n_paths
        self.value = None

    def update(self, idx, t, X, g, logd, mk):
        vals, per = self.field.mean_pieces(g, X[:, None], mk[:, None, :], t, logd, multivalued=True)
        if self.value is None:
            self.value = np.zeros((self.n, self.nz, len(per)))
            self.value[idx] = vals
            return
        prev = self.value[idx]
        for k, P in enumerate(per):
            vals[..., k] += P * np.round((prev[..., k] - vals[..., k]) / P)
        self.value[idx] = vals

    def result(self):
        return self.value.sum(axis=-1)


def tracker_factory(field: FieldModel, z0):
    return lambda n: BranchTracker(field, z0, n)


def tracked_mean(field: FieldModel, ens):
    """Mean at the stopping time: single-valued pieces at the final state plus tracked pieces."""
    out = np.zeros(ens.g.shape)
    # the remaining modulus differs per stopping time on the annulus
    groups = [np.ones(len(ens.t), bool)] if field.driving.modulus is None else \
        [ens.t == tt for tt in np.unique(ens.t)]
    for sel in groups:
        tt = ens.t[sel][0] if field.driving.modulus is not None else 0.0
        v, _ = field.mean_pieces(ens.g[sel], ens.X[sel][:, None], ens.marked[sel][:, None, :], tt,
                                 ens.log_deriv[sel], multivalued=False)
        out[sel] = v.sum(axis=-1)
    if ens.observed is not None:
        out = out + ens.observed
    return out


def tracked_covariance(field: FieldModel, ens, i, j):
    """C at the stopping time between tracked points i and j."""
    out = np.zeros(len(ens.t))
    groups = [np.ones(len(ens.t), bool)] if field.driving.modulus is None else \
        [ens.t == tt for tt in np.unique(ens.t)]
    for sel in groups:
        tt = ens.t[sel][0] if field.driving.modulus is not None else 0.0
        out[sel] = field.covariance(ens.g[sel, i], ens.g[sel, j], tt)
    return out


def unwrap_to(value, reference, period):
    """value shifted by a multiple of period to lie nearest reference."""
    if period is None:
        return value
    return value + period * np.round((reference - value) / period)


def require_domain(field: FieldModel, kind: DomainKind):
    if field.domain.kind is not kind:
        raise DomainMismatch(f"expected {kind.value}, got {field.domain.kind.value}")
