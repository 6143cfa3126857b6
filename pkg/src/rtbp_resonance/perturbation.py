"""Disturbing function and the resonant-track integrand.

The stability quadrature integrates
    (r/Delta1)_thetatheta + cos(theta)/r
over one period of the track F -> (r(F), theta(F)) of a p:q resonant
Keplerian orbit, where Delta1^2 = 1 + r^2 - 2 r cos(theta) is the squared
distance to the small primary (placed at radius 1 in the mu -> 0 limit).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CollisionError, ValidationError
from .kepler import solve_kepler_array, true_anomaly


@dataclass(frozen=True)
class ResonantFamily:
    """One family of p:q resonant periodic orbits.

    The two distinct families for given (p, q, e) are, in canonical form,
    n_g = 0 with n_l in {0, 1} when p is odd, and n_l = 0 with
    n_g in {0, 1} when p is even.
    """

    p: int
    q: int
    e: float
    n_l: int = 0
    n_g: int = 0
    direction: str = "direct"

    def __post_init__(self):
        if self.p < 1 or self.q < 1:
            raise ValidationError("p and q must be positive integers")
        if math.gcd(self.p, self.q) != 1:
            raise ValidationError(f"p={self.p}, q={self.q} are not coprime")
        if self.p == self.q:
            raise ValidationError("the 1/1 resonance is excluded")
        if not 0.0 < self.e < 1.0:
            raise ValidationError(f"eccentricity must be in (0, 1), got {self.e}")
        if self.n_l not in (0, 1) or self.n_g not in (0, 1):
            raise ValidationError("n_l and n_g must be 0 or 1")
        if self.direction not in ("direct", "retrograde"):
            raise ValidationError(f"unknown direction {self.direction!r}")
        if self.p % 2 == 1 and self.n_g != 0:
            raise ValidationError("canonical form requires n_g = 0 for odd p")
        if self.p % 2 == 0 and self.n_l != 0:
            raise ValidationError("canonical form requires n_l = 0 for even p")

    @property
    def retrograde(self) -> bool:
        return self.direction == "retrograde"

    @property
    def semimajor_axis(self) -> float:
        return (self.p / self.q) ** (2.0 / 3.0)

    def sibling(self) -> "ResonantFamily":
        """The other canonical family at the same (p, q, e, direction)."""
        if self.p % 2 == 1:
            return ResonantFamily(self.p, self.q, self.e, 1 - self.n_l, 0, self.direction)
        return ResonantFamily(self.p, self.q, self.e, 0, 1 - self.n_g, self.direction)


def canonical_families(p, q, e, direction="direct"):
    """The two distinct families for given (p, q, e), in a fixed order."""
    f0 = ResonantFamily(p, q, e, 0, 0, direction)
    return f0, f0.sibling()


@dataclass(frozen=True)
class TrackPoint:
    """One point of the resonant track, with unwrapped theta."""

    F: float
    r: float
    theta: float
    t: float
    delta1: float


def delta1(r, theta):
    """Distance to the small primary."""
    return np.sqrt(1.0 + r * r - 2.0 * r * np.cos(theta))


def omega_polar(r, theta):
    """Disturbing function 1/Delta1 - cos(theta)/r^2 - 1/r."""
    d = delta1(r, theta)
    if np.any(d == 0.0) or np.any(np.asarray(r) <= 0.0):
        raise CollisionError("disturbing function evaluated at a collision")
    return 1.0 / d - np.cos(theta) / (r * r) - 1.0 / r


def integrand_thetatheta(r, theta):
    """(r/Delta1)_thetatheta + cos(theta)/r with r held fixed.

    Closed form: (3 r^3 sin^2(theta) - r^2 cos(theta) Delta1^2) / Delta1^5
    plus cos(theta)/r.
    """
    c = np.cos(theta)
    s = np.sin(theta)
    d2 = 1.0 + r * r - 2.0 * r * c
    if np.any(d2 <= 0.0) or np.any(np.asarray(r) <= 0.0):
        raise CollisionError("integrand evaluated at a collision")
    d5 = d2 ** 2.5
    return (3.0 * r**3 * s * s - r * r * c * d2) / d5 + c / r


def track_arrays(f: ResonantFamily, F):
    """Vectorised resonant track: returns (r, theta, t, delta1) at the given F.

    E = q*F, l = E - e*sin(E); direct orbits have t = (l - n_l*pi)*p/q and
    retrograde ones t = (n_l*pi - l)*p/q; theta = nu + n_g*pi - t with nu
    continuously unwrapped, so theta is continuous in F.
    """
    F = np.asarray(F, dtype=float)
    E = f.q * F
    sinE = np.sin(E)
    cosE = np.cos(E)
    l = E - f.e * sinE
    if f.retrograde:
        t = (f.n_l * math.pi - l) * f.p / f.q
    else:
        t = (l - f.n_l * math.pi) * f.p / f.q
    r = f.semimajor_axis * (1.0 - f.e * cosE)
    nu = true_anomaly(E, f.e)
    theta = nu + f.n_g * math.pi - t
    return r, theta, t, delta1(r, theta)


def resonant_track(f: ResonantFamily, F: float) -> TrackPoint:
    """Single point of the resonant track (see track_arrays)."""
    r, theta, t, d1 = track_arrays(f, float(F))
    return TrackPoint(F=float(F), r=float(r), theta=float(theta), t=float(t), delta1=float(d1))


def track_integrand(f: ResonantFamily, F):
    """The two quadrature integrands along the track: ((r/Delta1)_tt, cos(theta)/r)."""
    r, theta, _, d1 = track_arrays(f, F)
    if np.any(d1 <= 0.0):
        raise CollisionError("resonant track passes through the small primary")
    c = np.cos(theta)
    s = np.sin(theta)
    d2 = d1 * d1
    c1 = (3.0 * r**3 * s * s - r * r * c * d2) / d2**2.5
    c2 = c / r
    return c1, c2


def delaunay_initial_state(f: ResonantFamily):
    """Delaunay initial conditions of the family (mu = 0)."""
    from .kepler import DelaunayState

    sign = -1.0 if f.retrograde else 1.0
    L = sign * (f.p / f.q) ** (1.0 / 3.0)
    G = L * math.sqrt(1.0 - f.e**2)
    return DelaunayState(L=L, G=G, l=f.n_l * math.pi, g=f.n_g * math.pi)
