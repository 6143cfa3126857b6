"""Numerical evaluation of the stability coefficient C(e, p, q).

C(e,p,q) = -6*pi*p^2 * (C1 + C2) with
    C1 = integral over F in [0, 2*pi) of (r/Delta1)_thetatheta
    C2 = integral over F in [0, 2*pi) of cos(theta)/r
along the resonant track.  The integrands are periodic and analytic in F,
so the uniform trapezoid rule converges geometrically; nodes are doubled
until successive values agree to the requested tolerance.

The module also provides two independent reformulations of C (second
l- and g-derivatives of the disturbing function integrated over time),
used to cross-validate the main quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import fsum

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import CollisionError, ConvergenceError
from .kepler import DelaunayState, solve_kepler, true_anomaly
from .perturbation import ResonantFamily, canonical_families, omega_polar, track_arrays, track_integrand

COLLISION_DELTA = 1e-6
NODE_CAP = 2**20
_N_START = 64


@dataclass(frozen=True)
class CoefficientResult:
    C: float
    C1: float
    C2: float
    nodes: int
    err_estimate: float
    min_delta1: float


def _trapezoid_pair(f: ResonantFamily, n: int):
    """Periodic trapezoid values of (C1, C2) on an n-node uniform F grid."""
    F = np.arange(n) * (2.0 * math.pi / n)
    c1, c2 = track_integrand(f, F)
    h = 2.0 * math.pi / n
    # fsum keeps roundoff well below the tiny C values reached at small e.
    return h * fsum(c1), h * fsum(c2)


def min_delta1(f: ResonantFamily) -> float:
    """Global minimum of Delta1 over the track, by dense sampling plus refinement."""
    n = 4096
    F = np.arange(n) * (2.0 * math.pi / n)
    _, _, _, d1 = track_arrays(f, F)
    i = int(np.argmin(d1))
    h = 2.0 * math.pi / n

    def d(Fv):
        return track_arrays(f, Fv)[3]

    res = minimize_scalar(
        d, bounds=(F[i] - h, F[i] + h), method="bounded", options={"xatol": 1e-10}
    )
    return float(min(res.fun, d1[i]))


def compute_C(f: ResonantFamily, tol: float = 1e-10) -> CoefficientResult:
    """Evaluate C(e,p,q) for one family by spectral trapezoid quadrature.

    tol is an absolute tolerance on C1 + C2.  Raises CollisionError when the
    track comes within COLLISION_DELTA of the small primary, and
    ConvergenceError if the node cap is hit first.
    """
    md = min_delta1(f)
    if md <= COLLISION_DELTA:
        raise CollisionError(
            f"track reaches Delta1 = {md:.3e} <= {COLLISION_DELTA} for {f}"
        )
    n = _N_START
    c1, c2 = _trapezoid_pair(f, n)
    while True:
        n2 = 2 * n
        if n2 > NODE_CAP:
            raise ConvergenceError(f"quadrature did not reach tol={tol} at {n} nodes")
        c1n, c2n = _trapezoid_pair(f, n2)
        err = abs((c1n + c2n) - (c1 + c2))
        n, c1, c2 = n2, c1n, c2n
        if err < tol:
            break
    scale = -6.0 * math.pi * f.p**2
    return CoefficientResult(
        C=scale * (c1 + c2),
        C1=c1,
        C2=c2,
        nodes=n,
        err_estimate=err,
        min_delta1=md,
    )


@dataclass(frozen=True)
class SweepRow:
    e: float
    C_family1: float | None
    C_family2: float | None
    min_delta1_1: float | None
    min_delta1_2: float | None
    status_1: str
    status_2: str


def _sweep_entry(task):
    p, q, direction, e, tol, which = task
    fam = canonical_families(p, q, e, direction)[which]
    try:
        res = compute_C(fam, tol)
        return res.C, res.min_delta1, "ok"
    except CollisionError:
        return None, min_delta1(fam), "collision"
    except ConvergenceError:
        return None, min_delta1(fam), "no-convergence"


def sweep_e(p, q, direction, e_grid, tol: float = 1e-10, map_fn=map):
    """Evaluate both canonical families over an e grid.

    Rows with collision or convergence failures are flagged in their status
    columns rather than dropped.  map_fn allows a parallel map (the worker is
    a picklable top-level function; rows stay in grid order regardless of
    schedule).
    """
    tasks = [(p, q, direction, float(e), tol, which) for e in e_grid for which in (0, 1)]
    results = list(map_fn(_sweep_entry, tasks))
    rows = []
    for i, e in enumerate(e_grid):
        (c1, d1, s1), (c2, d2, s2) = results[2 * i], results[2 * i + 1]
        rows.append(
            SweepRow(
                e=float(e),
                C_family1=c1,
                C_family2=c2,
                min_delta1_1=d1,
                min_delta1_2=d2,
                status_1=s1,
                status_2=s2,
            )
        )
    return rows


# ---------------------------------------------------------------------------
# Independent formulations: C from time integrals of Omega_ll and Omega_gg.
# These deliberately share no code with the track quadrature beyond the
# coordinate stack: derivatives are taken by finite differences of the
# disturbing function in Delaunay variables.
# ---------------------------------------------------------------------------


def omega_delaunay(L: float, G: float, l: float, g: float) -> float:
    """Disturbing function as a function of the Delaunay variables."""
    e = math.sqrt(max(0.0, 1.0 - G * G / (L * L)))
    E = solve_kepler(l, e)
    r = L * L * (1.0 - e * math.cos(E))
    theta = float(true_anomaly(E, e)) + g
    return float(omega_polar(r, theta))


def _second_derivative(fun, x, h):
    """Central second difference with two Richardson steps (O(h^6))."""
    f0 = fun(x)
    d2 = lambda hh: (fun(x + hh) - 2.0 * f0 + fun(x - hh)) / (hh * hh)
    a, b, c = d2(h), d2(h / 2.0), d2(h / 4.0)
    ab = (4.0 * b - a) / 3.0
    bc = (4.0 * c - b) / 3.0
    return (16.0 * bc - ab) / 15.0


def _family_angles(f: ResonantFamily, t):
    sign = -1.0 if f.retrograde else 1.0
    L = sign * (f.p / f.q) ** (1.0 / 3.0)
    G = L * math.sqrt(1.0 - f.e**2)
    l = f.n_l * math.pi + sign * f.q * t / f.p
    g = f.n_g * math.pi - t
    return L, G, l, g


def compute_C_via_omega_ll(f: ResonantFamily, n_nodes: int = 2048, h: float = 2e-2) -> float:
    """C from the time integral of Omega_ll (finite-difference oracle)."""

    def integrand(t):
        L, G, l, g = _family_angles(f, t)
        return _second_derivative(lambda ll: omega_delaunay(L, G, ll, g), l, h)

    T = 2.0 * math.pi * f.p
    ts = np.arange(n_nodes) * (T / n_nodes)
    vals = [integrand(t) for t in ts]
    integral = (T / n_nodes) * fsum(vals)
    return -6.0 * math.pi * f.q ** (4.0 / 3.0) / f.p ** (1.0 / 3.0) * integral


def compute_C_via_omega_gg(f: ResonantFamily, n_nodes: int = 2048, h: float = 2e-2) -> float:
    """C from the time integral of Omega_gg (finite-difference oracle)."""

    def integrand(t):
        L, G, l, g = _family_angles(f, t)
        return _second_derivative(lambda gg: omega_delaunay(L, G, l, gg), g, h)

    T = 2.0 * math.pi * f.p
    ts = np.arange(n_nodes) * (T / n_nodes)
    vals = [integrand(t) for t in ts]
    integral = (T / n_nodes) * fsum(vals)
    return -6.0 * math.pi * f.p ** (5.0 / 3.0) / f.q ** (2.0 / 3.0) * integral
