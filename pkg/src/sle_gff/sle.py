"""Driving processes of SLE variants and vectorized Euler-Maruyama ensembles.

Boundary points are carried by a real "lift": the position on the real line,
the real part on the strip top, or the continuous angle on a circle.
"""
from __future__ import annotations

import enum
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .domains import LAMBDA, DomainKind, DomainSpec, Dirichlet, Neumann, RiemannHilbert, annulus, disc, half_plane, strip
from .errors import (
    CollisionWithForcePoint,
    ConfigInvalid,
    DriftBlowup,
    MarkedPointCollision,
    ModulusExhausted,
    ThetaOutOfRange,
    UnsupportedProfile,
)
from .kernels import InnerBC, schwarz_annulus, schwarz_annulus_inverted
from .loewner import DrivingPath, rk4_step

TWO_PI = 2 * np.pi
CHUNK = 1000  # paths per independent generator


class Variant(str, enum.Enum):
    CHORDAL = "chordal"
    RADIAL = "radial"
    DIPOLAR = "dipolar"
    CHORDAL_RHO = "chordal-rho"
    STRIP_THETA = "strip-theta"
    STRIP_MULTI = "strip-multi"
    ANNULUS_STANDARD = "annulus-standard"
    ANNULUS_NEUMANN_RHO = "annulus-neumann-rho"
    ANNULUS_DIRICHLET = "annulus-dirichlet"
    ANNULUS_INNER = "annulus-inner"
    DIRICHLET_GENERAL_KAPPA = "dirichlet-general-kappa"


# ------------------------------------------------------------------- drifts


def drift_chordal_rho(X, mapped, rho):
    """sum_j rho_j / (X - mapped_j)."""
    X = np.asarray(X, dtype=float)
    mapped = np.asarray(mapped, dtype=float)
    rho = np.asarray(rho, dtype=float)
    gap = X[..., None] - mapped
    if np.any(np.abs(gap) < 1e-8):
        raise CollisionWithForcePoint("driving point collides with a force point")
    return np.sum(rho / gap, axis=-1)


def drift_strip_theta(theta: float) -> float:
    """Constant drift 2 theta of the strip with a Riemann-Hilbert top."""
    if not -0.5 < theta < 0.5:
        raise ThetaOutOfRange(f"theta={theta} outside (-1/2, 1/2)")
    return 2.0 * theta


def strip_theta_rho(theta: float) -> float:
    """Weight rho = 2 theta - 1 of the equivalent strip SLE_4(rho).

    Convention: the force point sits at -infinity, the target at +infinity,
    and the strip drift of SLE_4(rho) is then rho + 1.
    """
    return drift_strip_theta(theta) - 1.0


def drift_strip_multi(X, top_marks, top_levels, neumann_top: bool = False, lam: float = LAMBDA):
    """Drift for a strip whose top line carries piecewise constant Dirichlet data.

    top_marks: real parts a_1 < ... < a_n of the jump points on R + i pi.
    top_levels: n + 1 levels, listed left to right.
    With levels (c_0, ..., c_n) the mean is the basic theta = 1/2 solution plus
    A(z) = (c_0 - lam) z / pi + sum_j (c_j - c_{j-1}) log(e^z + e^{a_j}) / pi,
    and the drift is 1 + (pi / lam) A'(X).  A Neumann top gives 0.
    """
    X = np.asarray(X, dtype=float)
    if neumann_top:
        if np.size(top_marks):
            raise UnsupportedProfile("mixed Neumann/Dirichlet strip tops are not supported")
        return np.zeros_like(X)
    a = np.asarray(top_marks, dtype=float)
    c = np.asarray(top_levels, dtype=float)
    if len(c) != a.shape[-1] + 1:
        raise ValueError("need one more level than jump points")
    if np.any(np.diff(a, axis=-1) <= 0):
        raise MarkedPointCollision("top marked points must be strictly increasing")
    deriv = (c[0] - lam) / np.pi * np.ones_like(X)
    if a.shape[-1]:
        jumps = np.diff(c)
        # e^X / (e^X + e^a) = 1 / (1 + e^{a - X}), written stably
        w = 0.5 * (1 + np.tanh((X[..., None] - a) / 2))
        deriv = deriv + np.sum(jumps * w, axis=-1) / np.pi
    return 1.0 + np.pi / lam * deriv


def _outer_kernel(bc, m, x1, X, tol):
    return schwarz_annulus(m, bc, x1, X, tol=tol)


def drift_annulus_neumann_rho(X, mapped_x1, modulus_remaining, rho, tol=1e-14):
    """-i pi rho S~_{x1}(X) with the Neumann-inner kernel (real on the outer circle)."""
    if rho == 0:
        return np.zeros(np.shape(X))
    s = _outer_kernel(InnerBC.NEUMANN, modulus_remaining, mapped_x1, X, tol)
    return np.real(-1j * np.pi * rho * s)


def ccw_arc(X, x1):
    """Counterclockwise arc length from X to x1 in (0, 2 pi)."""
    return np.mod(np.angle(x1) - np.angle(X), TWO_PI)


def drift_annulus_dirichlet(X, mapped_x1, modulus_remaining, mu_inner, lam=LAMBDA, tol=1e-14):
    """-i pi rho S_{x1}(X) + (2 pi/m)(mu/(2 lam) + (l - pi)/(2 pi)) with rho = -2."""
    m = modulus_remaining
    if np.any(np.asarray(m) < 1e-6):
        raise ModulusExhausted("modulus exhausted")
    s = _outer_kernel(InnerBC.DIRICHLET_CONST, m, mapped_x1, X, tol)
    ell = ccw_arc(X, mapped_x1)
    return np.real(2j * np.pi * s) + (TWO_PI / m) * (mu_inner / (2 * lam) + (ell - np.pi) / TWO_PI)


def drift_annulus_inner(X, mapped_x1, modulus_remaining, winding, tol=1e-14):
    """-2 pi i (S^inv_{x1}(X) - 1/(2 pi)) + winding / m, winding = arg g(x1) - arg X on its branch."""
    m = modulus_remaining
    if np.any(np.asarray(m) < 1e-6):
        raise ModulusExhausted("modulus exhausted")
    s = schwarz_annulus_inverted(m, mapped_x1, X, tol=tol)
    return np.real(-2j * np.pi * (s - 1 / TWO_PI)) + winding / m


# -------------------------------------------------------------------- model


@dataclass(frozen=True)
class DrivingModel:
    """kappa plus a drift functional.

    marked: initial marked points; meaning depends on the variant
      chordal-rho: force points on R (rho per point)
      strip-multi: jump points on the top line (complex a + i pi)
      annulus-*: one point x1 (outer circle, or inner circle for annulus-inner)
    """

    variant: Variant
    kappa: float = 4.0
    theta: float = 0.0
    rho: tuple = ()
    marked: tuple = ()
    mu_inner: float = 0.0
    winding_branch: float | None = None
    top_levels: tuple = ()
    neumann_top: bool = False
    modulus: float | None = None
    base: Variant | None = None
    x0: complex | None = None

    def __post_init__(self):
        v = Variant(self.variant)
        object.__setattr__(self, "variant", v)
        if not self.kappa > 0:
            raise ConfigInvalid("kappa must be positive")
        object.__setattr__(self, "rho", tuple(float(r) for r in np.atleast_1d(self.rho)))
        object.__setattr__(self, "marked", tuple(complex(m) for m in self.marked))
        object.__setattr__(self, "top_levels", tuple(float(c) for c in self.top_levels))
        if v is Variant.STRIP_THETA and not -0.5 < self.theta < 0.5:
            raise ThetaOutOfRange(f"theta={self.theta} outside (-1/2, 1/2)")
        if v is Variant.DIRICHLET_GENERAL_KAPPA:
            if self.base is None:
                object.__setattr__(self, "base", Variant.ANNULUS_DIRICHLET)
            object.__setattr__(self, "base", Variant(self.base))
        if self.effective in (Variant.ANNULUS_STANDARD, Variant.ANNULUS_NEUMANN_RHO,
                              Variant.ANNULUS_DIRICHLET, Variant.ANNULUS_INNER):
            if self.modulus is None or self.modulus <= 0:
                raise ConfigInvalid("annulus variants need a positive modulus")
        if self.effective in (Variant.ANNULUS_NEUMANN_RHO, Variant.ANNULUS_DIRICHLET,
                              Variant.ANNULUS_INNER) and len(self.marked) != 1:
            raise ConfigInvalid("annulus variant needs exactly one marked point")
        if self.effective is Variant.ANNULUS_INNER:
            x1 = self.marked[0]
            if abs(abs(x1) - np.exp(-self.modulus)) > 1e-9:
                raise ConfigInvalid("inner marked point must lie on |z| = e^-p")
            d0 = np.angle(x1 / self.start)
            if self.winding_branch is None:
                object.__setattr__(self, "winding_branch", float(d0))
            elif abs(np.angle(np.exp(1j * (self.winding_branch - d0)))) > 1e-9:
                raise ConfigInvalid("winding_branch is not a determination of arg x1 - arg X0")
        if self.effective is Variant.CHORDAL_RHO and len(self.rho) != len(self.marked):
            raise ConfigInvalid("one rho per force point")
        if self.effective is Variant.STRIP_MULTI and len(self.top_levels) != len(self.marked) + 1:
            raise ConfigInvalid("strip-multi needs len(marked) + 1 top levels")

    @property
    def equivalent_rho(self) -> float | None:
        if self.effective is Variant.STRIP_THETA:
            return strip_theta_rho(self.theta)
        return None

    @property
    def effective(self) -> Variant:
        return self.base if self.variant is Variant.DIRICHLET_GENERAL_KAPPA else self.variant

    @property
    def domain(self) -> DomainSpec:
        v = self.effective
        if v in (Variant.CHORDAL, Variant.CHORDAL_RHO):
            return half_plane()
        if v is Variant.RADIAL:
            return disc()
        if v is Variant.DIPOLAR:
            return strip(Neumann())
        if v is Variant.STRIP_THETA:
            return strip(RiemannHilbert(self.theta))
        if v is Variant.STRIP_MULTI:
            return strip(Neumann() if self.neumann_top else Dirichlet())
        if v in (Variant.ANNULUS_STANDARD, Variant.ANNULUS_NEUMANN_RHO):
            return annulus(self.modulus, Neumann())
        return annulus(self.modulus, Dirichlet(self.mu_inner))

    @property
    def circle(self) -> bool:
        return self.domain.kind in (DomainKind.DISC, DomainKind.ANNULUS)

    @property
    def start(self) -> complex:
        if self.x0 is not None:
            return complex(self.x0)
        return 1.0 + 0j if self.circle else 0j

    @property
    def marked_kind(self) -> str:
        v = self.effective
        if v is Variant.STRIP_MULTI:
            return "top"
        if v is Variant.ANNULUS_INNER:
            return "inner"
        if self.circle:
            return "outer"
        return "line"

    def marked_lift(self) -> np.ndarray:
        if not self.marked:
            return np.zeros(0)
        m = np.array(self.marked)
        if self.marked_kind in ("line", "top"):
            return m.real.copy()
        if self.effective is Variant.ANNULUS_INNER:
            return np.array([np.angle(self.start) + self.winding_branch])
        # outer circle points: lift near the start angle
        return np.angle(self.start) + np.angle(m / self.start)

    def drift(self, X_lift, marked_lift, t, tol=1e-14):
        """Drift D_t as a function of the lifted driving value and lifted marked points."""
        v = self.effective
        X_lift = np.asarray(X_lift, dtype=float)
        if v in (Variant.CHORDAL, Variant.RADIAL, Variant.DIPOLAR, Variant.ANNULUS_STANDARD):
            return np.zeros_like(X_lift)
        if v is Variant.CHORDAL_RHO:
            return drift_chordal_rho(X_lift, marked_lift, self.rho)
        if v is Variant.STRIP_THETA:
            return np.full_like(X_lift, drift_strip_theta(self.theta))
        if v is Variant.STRIP_MULTI:
            return drift_strip_multi(X_lift, marked_lift, self.top_levels, self.neumann_top)
        m = self.modulus - t
        X = np.exp(1j * X_lift)
        th1 = marked_lift[..., 0]
        if v is Variant.ANNULUS_NEUMANN_RHO:
            return drift_annulus_neumann_rho(X, np.exp(1j * th1), m, self.rho[0], tol)
        if v is Variant.ANNULUS_DIRICHLET:
            return drift_annulus_dirichlet(X, np.exp(1j * th1), m, self.mu_inner, tol=tol)
        if v is Variant.ANNULUS_INNER:
            x1 = np.exp(-m + 1j * th1)
            return drift_annulus_inner(X, x1, m, th1 - X_lift, tol)
        raise UnsupportedProfile(v)

    def marked_velocity(self, X, marked_lift, t, tol=1e-14):
        """Time derivative of the lifted marked points under the Loewner flow."""
        kind = self.marked_kind
        if kind == "line":
            return 2.0 / (marked_lift - X[..., None])
        if kind == "top":
            return np.tanh((marked_lift - X[..., None]) / 2)
        m = self.modulus - t if self.modulus is not None else None
        Xc = np.exp(1j * X)[..., None]
        if self.domain.kind is DomainKind.DISC:
            g = np.exp(1j * marked_lift)
            return np.imag(-(g + Xc) / (g - Xc))
        if kind == "outer":
            g = np.exp(1j * marked_lift)
        else:
            g = np.exp(-m + 1j * marked_lift)
        return TWO_PI * np.imag(schwarz_annulus(m, InnerBC.DIRICHLET_CONST, Xc, g, tol=tol))

    def to_json(self, dt=None, T=None, seed=None) -> dict:
        params = {}
        v = self.effective
        if v is Variant.STRIP_THETA:
            params["theta"] = self.theta
        if self.rho:
            params["rho"] = list(self.rho)
        if v is Variant.ANNULUS_DIRICHLET:
            params["mu"] = self.mu_inner
        if self.marked:
            params["marked"] = [[m.real, m.imag] for m in self.marked]
        if v is Variant.ANNULUS_INNER:
            params["winding_branch"] = self.winding_branch
        if self.top_levels:
            params["top_levels"] = list(self.top_levels)
        if self.neumann_top:
            params["neumann_top"] = True
        if self.variant is Variant.DIRICHLET_GENERAL_KAPPA:
            params["base"] = self.base.value
        return {"variant": self.variant.value, "kappa": self.kappa, "params": params,
                "modulus": self.modulus, "dt": dt, "T": T, "seed": seed}

    @classmethod
    def from_json(cls, obj: dict):
        params = dict(obj.get("params", {}))
        known = {"theta", "rho", "mu", "marked", "winding_branch", "top_levels", "neumann_top", "base", "x0"}
        extra = set(params) - known
        if extra:
            raise ConfigInvalid(f"unknown variant params: {sorted(extra)}")
        marked = tuple(complex(*m) if isinstance(m, (list, tuple)) else complex(m)
                       for m in params.get("marked", ()))
        x0 = params.get("x0")
        return cls(
            variant=Variant(obj["variant"]),
            kappa=float(obj.get("kappa", 4.0)),
            theta=float(params.get("theta", 0.0)),
            rho=tuple(np.atleast_1d(params.get("rho", ()))),
            marked=marked,
            mu_inner=float(params.get("mu", 0.0)),
            winding_branch=params.get("winding_branch"),
            top_levels=tuple(params.get("top_levels", ())),
            neumann_top=bool(params.get("neumann_top", False)),
            modulus=obj.get("modulus"),
            base=params.get("base"),
            x0=None if x0 is None else complex(*x0) if isinstance(x0, (list, tuple)) else complex(x0),
        )


# ----------------------------------------------------------------- ensembles


@dataclass
class Ensemble:
    """Final (stopped) state of a batch of coupled driving/Loewner paths."""

    model: DrivingModel
    z0: np.ndarray
    X: np.ndarray  # lifted driving value per path
    g: np.ndarray  # (n_paths, n_z) images of the tracked points
    log_deriv: np.ndarray  # (n_paths, n_z) log g'
    marked: np.ndarray  # (n_paths, k) lifted marked points
    t: np.ndarray  # stopping time per path
    stopped: np.ndarray  # True where stopped before T
    qv: np.ndarray  # realized quadratic variation of the driving lift
    times: np.ndarray | None = None
    paths: np.ndarray | None = None  # (n_paths, n_steps + 1) lifts when recorded
    observed: np.ndarray | None = None  # final observer values, when an observer was given

    @property
    def n_paths(self):
        return len(self.X)


def time_grid(model: DrivingModel, dt: float, T: float, adaptive_fraction: float | None = None):
    """Uniform grid, refined near the end of the modulus for annulus variants when requested."""
    if model.modulus is not None and model.domain.kind is DomainKind.ANNULUS and T >= model.modulus:
        raise ModulusExhausted(f"T={T} reaches the modulus {model.modulus}")
    if adaptive_fraction is None:
        n = int(round(T / dt))
        return np.linspace(0.0, n * dt, n + 1)
    ts = [0.0]
    while ts[-1] < T - 1e-15:
        m = model.modulus - ts[-1]
        ts.append(min(T, ts[-1] + min(dt, adaptive_fraction * m)))
    return np.array(ts)


def _simulate_chunk(model, z0, times, rng, stop_radius, track_log_deriv, tol, record, observer=None):
    kind = model.domain.kind
    p = model.modulus if kind is DomainKind.ANNULUS else None
    circle = model.circle
    gen, n_paths = rng
    X = np.full(n_paths, np.angle(model.start) if circle else model.start.real)
    g = np.tile(np.asarray(z0, dtype=complex), (n_paths, 1))
    logd = np.zeros_like(g)
    mk = np.tile(model.marked_lift(), (n_paths, 1))
    tstop = np.full(n_paths, times[-1])
    active = np.ones(n_paths, dtype=bool)
    qv = np.zeros(n_paths)
    sk = np.sqrt(model.kappa)
    rec = np.empty((n_paths, len(times))) if record else None
    if record:
        rec[:, 0] = X
    obs = None
    if observer is not None:
        obs = observer(n_paths)
        obs.update(np.arange(n_paths), times[0], X, g, logd, mk)
    for i in range(len(times) - 1):
        t0, h = times[i], times[i + 1] - times[i]
        dB = gen.standard_normal(n_paths) * np.sqrt(h)
        if active.any():
            a = active
            D = model.drift(X[a], mk[a], t0, tol)
            if np.any(~np.isfinite(D)) or np.any(np.abs(D) > 1e6):
                raise DriftBlowup(f"drift {np.nanmax(np.abs(D)):.3g} at t={t0:.4g}")
            dX = sk * dB[a] + D * h
            X1 = X[a] + dX
            if g.shape[1]:
                xx0 = X[a][:, None]
                xx1 = X1[:, None]
                res = rk4_step(kind, g[a], xx0, xx1, t0, h, p, tol,
                               logd=logd[a] if track_log_deriv else None)
                if track_log_deriv:
                    g[a], logd[a] = res
                else:
                    g[a] = res
            if mk.shape[1]:
                # RK4 for the lifted marked points with linearly interpolated driving
                def vel(s, y):
                    return model.marked_velocity(X[a] + s * dX, y, t0 + s * h, tol)

                y = mk[a]
                k1 = vel(0.0, y)
                k2 = vel(0.5, y + 0.5 * h * k1)
                k3 = vel(0.5, y + 0.5 * h * k2)
                k4 = vel(1.0, y + h * k3)
                mk[a] = y + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
            X[a] = X1
            qv[a] += dX**2
            if obs is not None:
                ia = np.nonzero(a)[0]
                obs.update(ia, times[i + 1], X[ia], g[ia], logd[ia], mk[ia])
            # stopping: tracked points approach the driving point, or the
            # driving point approaches a marked point
            near = np.zeros(a.sum(), dtype=bool)
            if g.shape[1]:
                xb = np.exp(1j * X1)[:, None] if circle else X1[:, None]
                near |= np.any(np.abs(g[a] - xb) < stop_radius, axis=1)
            if mk.shape[1] and model.marked_kind in ("line", "outer"):
                near |= np.any(np.abs(mk[a] - X1[:, None]) < stop_radius, axis=1)
            idx = np.nonzero(a)[0][near]
            tstop[idx] = times[i + 1]
            active[idx] = False
        if record:
            rec[:, i + 1] = X
    return X, g, logd, mk, tstop, ~active, qv, rec, None if obs is None else obs.result()


def simulate(model: DrivingModel, z0=(), T: float = 0.5, dt: float = 1e-4, n_paths: int = 1,
             seed: int = 0, stop_radius: float = 0.2, track_log_deriv: bool = False,
             tol: float = 1e-12, record: bool = False, threads: int = 1,
             adaptive_fraction: float | None = None, observer=None) -> Ensemble:
    """Run n_paths coupled driving/Loewner paths.

    Paths are split into chunks of CHUNK; chunk c draws from the c-th child of
    SeedSequence(seed), so results do not depend on the number of threads.
    A path stops (freezes) once a tracked point comes within stop_radius of
    the driving point, which keeps the stopped mean a bounded martingale.

    ``observer(n)`` builds an object whose ``update(idx, t, X, g, logd, mk)``
    is called after every step with the still-active paths; its ``result()``
    is stored on the ensemble (used to follow branches of multivalued means).
    """
    times = time_grid(model, dt, T, adaptive_fraction)
    n_chunks = int(np.ceil(n_paths / CHUNK))
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    sizes = [min(CHUNK, n_paths - c * CHUNK) for c in range(n_chunks)]
    z0 = np.atleast_1d(np.asarray(z0, dtype=complex))

    def run(c):
        gen = np.random.default_rng(children[c])
        return _simulate_chunk(model, z0, times, (gen, sizes[c]), stop_radius, track_log_deriv,
                               tol, record, observer)

    if threads > 1 and n_chunks > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(run, range(n_chunks)))
    else:
        parts = [run(c) for c in range(n_chunks)]
    cat = [np.concatenate([p[k] for p in parts]) for k in range(7)]
    rec = np.concatenate([p[7] for p in parts]) if record else None
    observed = np.concatenate([p[8] for p in parts]) if observer is not None else None
    return Ensemble(model, z0, *cat, times=times, paths=rec, observed=observed)


def sample_path(model: DrivingModel, dt: float = 1e-4, T: float = 0.5, seed: int = 0,
                tol: float = 1e-12) -> DrivingPath:
    """One driving path on the uniform grid."""
    ens = simulate(model, (), T, dt, 1, seed, tol=tol, record=True)
    return DrivingPath.from_lift(model.domain, ens.times, ens.paths[0])
