"""Full-problem verification of the stability coefficient.

For mu > 0 the resonant periodic orbit survives as a symmetric periodic
solution of the rotating-frame equations with both primaries.  This module
differentially corrects that orbit by Newton shooting, integrates the
variational equations to obtain its monodromy matrix M, and extracts the
coefficient from tr(M) - 4 ~ C*mu, extrapolating the estimate to mu -> 0.

State order is (p_x, p_y, x, y); the primaries of masses 1-mu and mu sit at
(-mu, 0) and (1-mu, 0).  The canonical momenta equal the inertial velocity
components, so xdot = p_x + y and ydot = p_y - x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import CollisionError, ConvergenceError, ValidationError
from .kepler import RtbpState, delaunay_to_cartesian
from .perturbation import ResonantFamily, delaunay_initial_state

_COLLISION_RADIUS = 1e-8
_INTEGRATOR_TOL = 1e-12
_NEWTON_MAX_ITER = 25


@dataclass(frozen=True)
class PeriodicOrbit:
    """A corrected symmetric periodic orbit of the full problem.

    The initial state lies on the symmetry section y = 0, p_x = 0; the
    residuals are |y(T/2)| and |p_x(T/2)| after correction.
    """

    initial_state: RtbpState
    period: float
    mu: float
    family: ResonantFamily
    residual_y: float
    residual_px: float


@dataclass(frozen=True)
class MonodromyReport:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    trace: float
    C_estimate: float
    mu: float

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.matrix))


@dataclass(frozen=True)
class ExtrapolationResult:
    """Fit of C_estimate(mu) = C + c1*sqrt(mu)."""

    C: float
    sqrt_mu_slope: float
    fit_residual: float
    mu_list: tuple
    estimates: tuple


def rtbp_hamiltonian(s, mu: float) -> float:
    """Rotating-frame Hamiltonian (the Jacobi-constant energy)."""
    p_x, p_y, x, y = (s.as_array() if isinstance(s, RtbpState) else np.asarray(s))[:4]
    d0 = math.hypot(x + mu, y)
    d1 = math.hypot(x - 1.0 + mu, y)
    if d0 == 0.0 or (mu > 0.0 and d1 == 0.0):
        raise CollisionError("state at a primary")
    return (
        0.5 * (p_x**2 + p_y**2)
        + y * p_x
        - x * p_y
        - (1.0 - mu) / d0
        - (mu / d1 if mu != 0.0 else 0.0)
    )


def rtbp_derivatives(s, mu: float, with_variational: bool = False):
    """Hamilton's equations of the full problem; optionally the Jacobian too.

    Accepts an RtbpState or a length-4 array (p_x, p_y, x, y).  With
    with_variational=True, returns (f, J) where J is the 4x4 Jacobian of the
    vector field at s, for propagating variational equations.
    """
    arr = s.as_array() if isinstance(s, RtbpState) else np.asarray(s, dtype=float)
    p_x, p_y, x, y = arr[:4]
    dx0, dx1 = x + mu, x - 1.0 + mu
    d0sq = dx0 * dx0 + y * y
    d1sq = dx1 * dx1 + y * y
    # Only a primary with mass attracts; its massless limit is regular there.
    if d0sq < _COLLISION_RADIUS**2 or (mu > 0.0 and d1sq < _COLLISION_RADIUS**2):
        raise CollisionError("trajectory reached a primary")
    d0_3 = d0sq**-1.5
    d1_3 = d1sq**-1.5 if mu > 0.0 else 0.0
    m0, m1 = 1.0 - mu, mu
    gx = -m0 * dx0 * d0_3 - m1 * dx1 * d1_3
    gy = -(m0 * d0_3 + m1 * d1_3) * y
    f = np.array([p_y + gx, -p_x + gy, p_x + y, p_y - x])
    if not with_variational:
        return f
    d0_5 = d0_3 / d0sq
    d1_5 = d1_3 / d1sq
    gxx = m0 * (3.0 * dx0 * dx0 * d0_5 - d0_3) + m1 * (3.0 * dx1 * dx1 * d1_5 - d1_3)
    gxy = 3.0 * y * (m0 * dx0 * d0_5 + m1 * dx1 * d1_5)
    gyy = m0 * (3.0 * y * y * d0_5 - d0_3) + m1 * (3.0 * y * y * d1_5 - d1_3)
    J = np.array(
        [
            [0.0, 1.0, gxx, gxy],
            [-1.0, 0.0, gxy, gyy],
            [1.0, 0.0, 0.0, 1.0],
            [0.0, 1.0, -1.0, 0.0],
        ]
    )
    return f, J


def _flow(s0: np.ndarray, t_span: float, mu: float, with_variational: bool = False):
    """Integrate the state (and optionally the variational matrix from I).

    Returns the final state, or (state, Phi) with Phi the state-transition
    matrix over [0, t_span].
    """

    if with_variational:

        def rhs(_, z):
            f, J = rtbp_derivatives(z[:4], mu, with_variational=True)
            phi = z[4:].reshape(4, 4)
            return np.concatenate([f, (J @ phi).ravel()])

        z0 = np.concatenate([s0, np.eye(4).ravel()])
    else:

        def rhs(_, z):
            return rtbp_derivatives(z, mu)

        z0 = np.asarray(s0, dtype=float)

    sol = solve_ivp(
        rhs,
        (0.0, t_span),
        z0,
        method="DOP853",
        rtol=_INTEGRATOR_TOL,
        atol=_INTEGRATOR_TOL,
        dense_output=False,
    )
    if not sol.success:
        raise ConvergenceError(f"integration failed: {sol.message}")
    zf = sol.y[:, -1]
    if with_variational:
        return zf[:4], zf[4:].reshape(4, 4)
    return zf


def _seed_state(f: ResonantFamily) -> RtbpState:
    """Symmetric mu=0 initial condition on the section y = 0, p_x = 0."""
    s = delaunay_to_cartesian(delaunay_initial_state(f))
    # The Delaunay seed sits at a perihelion/aphelion on the x axis; snap the
    # roundoff so the section conditions hold exactly.
    return RtbpState(p_x=0.0, p_y=s.p_y, x=s.x, y=0.0)


def refine_periodic_orbit(f: ResonantFamily, mu: float, tol: float = 1e-10) -> PeriodicOrbit:
    """Newton shooting for the symmetric p:q resonant orbit at given mu.

    Unknowns are (x0, T/2); p_y(0) = G0/x0 keeps the angular momentum at its
    mu = 0 family value, and the targets are y(T/2) = 0 and p_x(T/2) = 0.
    """
    if not 0.0 < mu <= 1e-3:
        raise ValidationError(f"mu must be in (0, 1e-3], got {mu}")
    sign = -1.0 if f.retrograde else 1.0
    G0 = sign * (f.p / f.q) ** (1.0 / 3.0) * math.sqrt(1.0 - f.e**2)
    seed = _seed_state(f)
    x0 = seed.x
    Th = math.pi * f.p

    for _ in range(_NEWTON_MAX_ITER):
        s0 = np.array([0.0, G0 / x0, x0, 0.0])
        sf, phi = _flow(s0, Th, mu, with_variational=True)
        res = np.array([sf[3], sf[0]])  # (y, p_x) at T/2
        if max(abs(res[0]), abs(res[1])) <= tol:
            return PeriodicOrbit(
                initial_state=RtbpState.from_array(s0),
                period=2.0 * Th,
                mu=mu,
                family=f,
                residual_y=abs(res[0]),
                residual_px=abs(res[1]),
            )
        ds0_dx0 = np.array([0.0, -G0 / (x0 * x0), 1.0, 0.0])
        dsf_dx0 = phi @ ds0_dx0
        dsf_dT = rtbp_derivatives(sf, mu)
        A = np.array(
            [
                [dsf_dx0[3], dsf_dT[3]],
                [dsf_dx0[0], dsf_dT[0]],
            ]
        )
        try:
            delta = np.linalg.solve(A, -res)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError("singular shooting Jacobian") from exc
        if not np.all(np.isfinite(delta)) or abs(delta[0]) > 0.5 * abs(x0):
            raise ConvergenceError(
                f"Newton correction diverged for {f} at mu={mu}"
            )
        x0 += delta[0]
        Th += delta[1]
    raise ConvergenceError(f"shooting did not converge to tol={tol} for {f} at mu={mu}")


def monodromy(o: PeriodicOrbit) -> MonodromyReport:
    """Monodromy matrix over one period, from the variational equations."""
    s0 = o.initial_state.as_array()
    _, M = _flow(s0, o.period, o.mu, with_variational=True)
    tr = float(np.trace(M))
    return MonodromyReport(
        matrix=M,
        eigenvalues=np.linalg.eigvals(M),
        trace=tr,
        C_estimate=(tr - 4.0) / o.mu,
        mu=o.mu,
    )


def extrapolate_C(
    f: ResonantFamily,
    mu_list=(1e-4, 3e-5, 1e-5, 3e-6),
    tol: float = 1e-10,
    map_fn=map,
) -> ExtrapolationResult:
    """Extrapolate (tr M - 4)/mu to mu -> 0.

    The multipliers are 1 +/- sqrt(C*mu) + O(mu), so the per-mu estimate
    carries an O(sqrt(mu)) error; a least-squares fit of C + c1*sqrt(mu)
    removes the leading correction.
    """
    mus = [float(m) for m in mu_list]
    if len(mus) < 2:
        raise ValidationError("need at least two mu values to extrapolate")
    if any(m2 >= m1 for m1, m2 in zip(mus, mus[1:])):
        raise ValidationError("mu_list must be strictly decreasing")

    def estimate(mu):
        return monodromy(refine_periodic_orbit(f, mu, tol)).C_estimate

    ests = list(map_fn(estimate, mus))
    A = np.column_stack([np.ones(len(mus)), np.sqrt(mus)])
    coef, *_ = np.linalg.lstsq(A, np.array(ests), rcond=None)
    resid = float(np.max(np.abs(A @ coef - ests)))
    return ExtrapolationResult(
        C=float(coef[0]),
        sqrt_mu_slope=float(coef[1]),
        fit_residual=resid,
        mu_list=tuple(mus),
        estimates=tuple(float(v) for v in ests),
    )
