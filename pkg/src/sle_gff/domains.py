"""Canonical domains, boundary conditions and marked points."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainMismatch, ThetaOutOfRange

# half of the boundary height gap at kappa = 4
LAMBDA = float(np.sqrt(np.pi / 8.0))


def lambda_kappa(kappa: float) -> float:
    return float(np.sqrt(np.pi / (2.0 * kappa)))


def alpha_kappa(kappa: float) -> float:
    return (4.0 - kappa) / (2.0 * np.sqrt(2.0 * np.pi * kappa))


class DomainKind(str, enum.Enum):
    HALF_PLANE = "half-plane"
    DISC = "disc"
    STRIP = "strip"
    ANNULUS = "annulus"


@dataclass(frozen=True)
class Dirichlet:
    value: float = 0.0


@dataclass(frozen=True)
class Neumann:
    pass


@dataclass(frozen=True)
class RiemannHilbert:
    """alpha * d_n M + beta * d_t M = 0 with (alpha, beta) = (cos pi theta, -sin pi theta)."""

    theta: float

    def __post_init__(self):
        if not -0.5 < self.theta < 0.5:
            raise ThetaOutOfRange(f"theta={self.theta} outside (-1/2, 1/2)")

    @property
    def alpha(self) -> float:
        return float(np.cos(np.pi * self.theta))

    @property
    def beta(self) -> float:
        return float(-np.sin(np.pi * self.theta))


BoundaryCondition = Dirichlet | Neumann | RiemannHilbert


@dataclass(frozen=True)
class DomainSpec:
    """A canonical domain with marked boundary points.

    ``secondary`` is the condition on the second boundary piece: the top line
    of the strip or the inner circle of the annulus.  The real line / unit
    circle always carries (jump-)Dirichlet data.
    """

    kind: DomainKind
    modulus: float | None = None
    marked: tuple = ()
    secondary: BoundaryCondition = field(default_factory=Dirichlet)

    def __post_init__(self):
        if self.kind is DomainKind.ANNULUS:
            if self.modulus is None or not self.modulus > 0:
                raise ValueError("annulus needs a positive modulus")
        elif self.modulus is not None:
            raise DomainMismatch("modulus only applies to the annulus")
        for x in self.marked:
            if not self.on_boundary(x):
                raise ValueError(f"marked point {x} is not on the boundary")

    def on_boundary(self, x, tol: float = 1e-12) -> bool:
        x = complex(x)
        if self.kind is DomainKind.HALF_PLANE:
            return abs(x.imag) < tol
        if self.kind is DomainKind.DISC:
            return abs(abs(x) - 1.0) < tol
        if self.kind is DomainKind.STRIP:
            return abs(x.imag) < tol or abs(x.imag - np.pi) < tol
        r = abs(x)
        return abs(r - 1.0) < tol or abs(r - np.exp(-self.modulus)) < tol

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.kind is DomainKind.HALF_PLANE:
            return z.imag > 0
        if self.kind is DomainKind.DISC:
            return np.abs(z) < 1
        if self.kind is DomainKind.STRIP:
            return (z.imag > 0) & (z.imag < np.pi)
        r = np.abs(z)
        return (r < 1) & (r > np.exp(-self.modulus))

    def inward_normal(self, x) -> complex:
        x = complex(x)
        if self.kind is DomainKind.HALF_PLANE:
            return 1j
        if self.kind is DomainKind.STRIP:
            return 1j if abs(x.imag) < 1e-9 else -1j
        if self.kind is DomainKind.DISC or abs(abs(x) - 1) < 1e-9:
            return -x / abs(x)
        return x / abs(x)

    def tangent(self, x) -> complex:
        """Positively oriented unit tangent (domain on the left)."""
        return -1j * self.inward_normal(x)


def half_plane() -> DomainSpec:
    return DomainSpec(DomainKind.HALF_PLANE)


def disc() -> DomainSpec:
    return DomainSpec(DomainKind.DISC)


def strip(secondary: BoundaryCondition | None = None) -> DomainSpec:
    return DomainSpec(DomainKind.STRIP, secondary=secondary or Dirichlet())


def annulus(p: float, secondary: BoundaryCondition | None = None) -> DomainSpec:
    return DomainSpec(DomainKind.ANNULUS, modulus=float(p), secondary=secondary or Dirichlet())
