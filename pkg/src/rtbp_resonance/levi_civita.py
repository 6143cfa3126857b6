"""Levi-Civita regularization and collision-adapted action-angle variables.

The parabolic map x + mu = xi^2 - nu^2, y = 2*xi*nu (with momenta from the
generating function S = (-mu + xi^2 - nu^2) p_x + 2 xi nu p_y) regularizes
the collision with the primary of mass 1 - mu.  On a fixed energy level
H = C the rescaled Hamiltonian is

    K = (xi^2 + nu^2)(H - C)
      = (p_xi^2 + p_nu^2)/8 + ((xi^2+nu^2)/2)(nu p_xi - xi p_nu - 2C) - 1
        + mu [ 1 + (nu p_xi + xi p_nu)/2 - (xi^2+nu^2)/W ],

with W the distance to the small primary in the physical plane, and the
K-flow in tau corresponds to the H-flow on H = C via dt = (xi^2+nu^2) dtau.

For mu = 0 the module builds action-angle variables valid through collision
for G != 0, where G = xi p_nu - nu p_xi is twice the physical angular
momentum: actions L = (K+1)/sqrt(-G-2C) and L* = L - |G|/2, angles l
(from u = r^2 = a(1 - e cos l)) and g.  The pair of angles conjugate to
(L*, G) is (l, g + l/2) for G > 0 and (l, g - l/2) for G < 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConvergenceError, DegenerateCaseError, ValidationError
from .kepler import RtbpState

_E_DEGENERATE = 1e-12
_INTEGRATOR_TOL = 1e-12


@dataclass(frozen=True)
class RegularizedState:
    """Levi-Civita variables (p_xi, p_nu, xi, nu) plus the trajectory's Jacobi constant."""

    p_xi: float
    p_nu: float
    xi: float
    nu: float
    C_J: float

    def as_array(self) -> np.ndarray:
        return np.array([self.p_xi, self.p_nu, self.xi, self.nu])

    @staticmethod
    def from_array(z, C_J: float) -> "RegularizedState":
        return RegularizedState(float(z[0]), float(z[1]), float(z[2]), float(z[3]), C_J)

    @property
    def r_squared(self) -> float:
        return self.xi**2 + self.nu**2

    @property
    def angular_momentum_G(self) -> float:
        """Twice the physical angular momentum about the large primary."""
        return self.xi * self.p_nu - self.nu * self.p_xi


@dataclass(frozen=True)
class ActionAngle:
    """Collision-adapted action-angle variables (mu = 0, G != 0)."""

    L: float
    L_star: float
    G: float
    l: float
    g: float
    a: float
    e: float


def lc_forward(s: RtbpState, mu: float, C_J: float | None = None) -> RegularizedState:
    """Cartesian rotating state to Levi-Civita variables, branch xi >= 0.

    The map is two-to-one ((xi, nu) and (-xi, -nu) are the same physical
    point); the branch with xi >= 0 (and nu >= 0 when xi = 0) is returned.
    C_J defaults to the rotating-frame Hamiltonian of s.
    """
    w = complex(s.x + mu, s.y)
    if w == 0.0:
        raise ValidationError("branch point of the Levi-Civita square root (collision)")
    z = np.sqrt(w)
    if z.real < 0.0 or (z.real == 0.0 and z.imag < 0.0):
        z = -z
    xi, nu = z.real, z.imag
    if C_J is None:
        from .verifier import rtbp_hamiltonian

        C_J = rtbp_hamiltonian(s, mu)
    return RegularizedState(
        p_xi=2.0 * (xi * s.p_x + nu * s.p_y),
        p_nu=2.0 * (-nu * s.p_x + xi * s.p_y),
        xi=xi,
        nu=nu,
        C_J=float(C_J),
    )


def lc_inverse(s: RegularizedState, mu: float) -> RtbpState:
    """Levi-Civita variables back to the Cartesian rotating state."""
    rsq = s.r_squared
    x = -mu + s.xi**2 - s.nu**2
    y = 2.0 * s.xi * s.nu
    if rsq == 0.0:
        # Collision point: the position is the large primary, and the only
        # momenta consistent with finite regularized momenta are zero.
        return RtbpState(p_x=0.0, p_y=0.0, x=x, y=y)
    p_x = (s.xi * s.p_xi - s.nu * s.p_nu) / (2.0 * rsq)
    p_y = (s.nu * s.p_xi + s.xi * s.p_nu) / (2.0 * rsq)
    return RtbpState(p_x=p_x, p_y=p_y, x=x, y=y)


def lc_map(s, mu: float, direction: str):
    """Dispatch between the forward and inverse Levi-Civita maps."""
    if direction == "forward":
        return lc_forward(s, mu)
    if direction == "inverse":
        return lc_inverse(s, mu)
    raise ValidationError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def _w_distance(xi: float, nu: float) -> float:
    """Distance to the small primary expressed in Levi-Civita coordinates."""
    return math.hypot(xi * xi - nu * nu - 1.0, 2.0 * xi * nu)


def k_value(s: RegularizedState, mu: float) -> float:
    """The regularized Hamiltonian K = (xi^2 + nu^2)(H - C_J)."""
    rsq = s.r_squared
    K0 = (
        (s.p_xi**2 + s.p_nu**2) / 8.0
        + 0.5 * rsq * (s.nu * s.p_xi - s.xi * s.p_nu - 2.0 * s.C_J)
        - 1.0
    )
    if mu == 0.0:
        return K0
    W = _w_distance(s.xi, s.nu)
    if W == 0.0:
        raise ValidationError("small-primary term of K is singular (W = 0)")
    return K0 + mu * (1.0 + 0.5 * (s.nu * s.p_xi + s.xi * s.p_nu) - rsq / W)


def k_flow_derivatives(z, C_J: float, mu: float) -> np.ndarray:
    """Hamilton's equations of K in the rescaled time tau.

    z is (p_xi, p_nu, xi, nu); C_J is the fixed Jacobi constant appearing
    in K.
    """
    p_xi, p_nu, xi, nu = np.asarray(z, dtype=float)[:4]
    rsq = xi * xi + nu * nu
    ang = nu * p_xi - xi * p_nu - 2.0 * C_J
    dK_dpxi = p_xi / 4.0 + 0.5 * rsq * nu
    dK_dpnu = p_nu / 4.0 - 0.5 * rsq * xi
    dK_dxi = xi * ang - 0.5 * rsq * p_nu
    dK_dnu = nu * ang + 0.5 * rsq * p_xi
    if mu != 0.0:
        W = _w_distance(xi, nu)
        if W == 0.0:
            raise ValidationError("small-primary term of K is singular (W = 0)")
        W_xi = 2.0 * xi * (rsq - 1.0) / W
        W_nu = 2.0 * nu * (rsq + 1.0) / W
        dK_dpxi += 0.5 * mu * nu
        dK_dpnu += 0.5 * mu * xi
        dK_dxi += mu * (0.5 * p_nu - (2.0 * xi * W - rsq * W_xi) / (W * W))
        dK_dnu += mu * (0.5 * p_xi - (2.0 * nu * W - rsq * W_nu) / (W * W))
    return np.array([-dK_dxi, -dK_dnu, dK_dpxi, dK_dpnu])


def integrate_k_flow(
    s: RegularizedState,
    mu: float,
    tau_span: float,
    n_samples: int = 0,
    tol: float = _INTEGRATOR_TOL,
):
    """Integrate the K-flow from s over [0, tau_span].

    With n_samples > 0, returns (taus, states) sampled uniformly (including
    both endpoints); otherwise returns the final RegularizedState.
    """
    taus = np.linspace(0.0, tau_span, n_samples) if n_samples > 0 else None
    sol = solve_ivp(
        lambda _, z: k_flow_derivatives(z, s.C_J, mu),
        (0.0, tau_span),
        s.as_array(),
        method="DOP853",
        rtol=tol,
        atol=tol,
        t_eval=taus,
    )
    if not sol.success:
        raise ConvergenceError(f"K-flow integration failed: {sol.message}")
    if n_samples > 0:
        states = [RegularizedState.from_array(sol.y[:, i], s.C_J) for i in range(sol.y.shape[1])]
        return sol.t, states
    return RegularizedState.from_array(sol.y[:, -1], s.C_J)


def _check_conditions(K: float, G: float, C: float):
    if G + 2.0 * C >= 0.0:
        raise ValidationError(f"condition G + 2C < 0 violated (G={G}, C={C})")
    if K + 1.0 <= 0.0:
        raise ValidationError(f"condition K + 1 > 0 violated (K={K})")
    disc = (K + 1.0) ** 2 + G * G * (G + 2.0 * C) / 4.0
    if disc == 0.0:
        # disc = s0^2 (L^2 - G^2/4): exactly zero is the circular case
        raise DegenerateCaseError("circular case e = 0: the angle l is undefined")
    if disc < 0.0:
        raise ValidationError(
            f"condition (K+1)^2 + G^2(G+2C)/4 > 0 violated (got {disc})"
        )


def mean_anomaly_integral(l: float, e: float) -> float:
    """The primitive of dl / (1 - e cos l), vanishing at l = 0.

    Closed form (2/sqrt(1-e^2)) * arctan(sqrt((1+e)/(1-e)) tan(l/2)),
    continued across l = pi so the result is single-valued and increasing
    on the whole real line.
    """
    if not 0.0 <= e < 1.0:
        raise ValidationError(f"eccentricity must be in [0, 1), got {e}")
    k = math.floor((l + math.pi) / (2.0 * math.pi))
    lr = l - 2.0 * math.pi * k
    branch = math.atan2(
        math.sqrt(1.0 + e) * math.sin(0.5 * lr), math.sqrt(1.0 - e) * math.cos(0.5 * lr)
    )
    return 2.0 * (math.pi * k + branch) / math.sqrt(1.0 - e * e)


def action_angle_from_state(
    s: RegularizedState, C: float, giacaglia_uncorrected: bool = False
) -> ActionAngle:
    """Action-angle variables of the mu = 0 regularized flow at energy C.

    Requires G != 0 and the bounded-motion conditions G + 2C < 0, K + 1 > 0,
    (K+1)^2 + G^2(G+2C)/4 > 0.  The angle l follows u = r^2 = a(1 - e cos l)
    with 0 <= l <= pi when the radial momentum is >= 0 and -pi < l < 0
    otherwise; g subtracts from the polar angle of (xi, nu) the secular part
    (G/(4L)) * integral(dl/(1 - e cos l)) and the periodic part
    sqrt(L^2 - G^2/4) sin(l) / (2(-G - 2C)).

    giacaglia_uncorrected=True reproduces the historical (wrong) formula:
    the secular factor becomes sqrt(1-e^2)/4 and the periodic term loses the
    factor 2 in its denominator.
    """
    G = s.angular_momentum_G
    if G == 0.0:
        raise ValidationError("action-angle chart invalid at G = 0")
    K = k_value(s, 0.0) + (s.C_J - C) * s.r_squared  # K at the requested energy C
    _check_conditions(K, G, C)
    s0 = math.sqrt(-G - 2.0 * C)
    L = (K + 1.0) / s0
    a = L / s0
    e2 = 1.0 - G * G / (4.0 * L * L)
    if e2 <= _E_DEGENERATE:
        raise DegenerateCaseError("circular case e = 0: the angle l is undefined")
    e = math.sqrt(e2)
    u = s.r_squared
    cos_l = (1.0 - u / a) / e
    cos_l = min(1.0, max(-1.0, cos_l))
    radial = s.xi * s.p_xi + s.nu * s.p_nu
    l = math.acos(cos_l) if radial >= 0.0 else -math.acos(cos_l)
    theta = math.atan2(s.nu, s.xi)
    if giacaglia_uncorrected:
        secular = math.sqrt(1.0 - e2) / 4.0
        periodic = math.sqrt(L * L - G * G / 4.0) / (-G - 2.0 * C)
    else:
        secular = G / (4.0 * L)
        periodic = math.sqrt(L * L - G * G / 4.0) / (2.0 * (-G - 2.0 * C))
    g = theta - secular * mean_anomaly_integral(l, e) - periodic * math.sin(l)
    return ActionAngle(L=L, L_star=L - 0.5 * abs(G), G=G, l=l, g=g, a=a, e=e)


def state_from_action_angle(L: float, G: float, l: float, g: float, C: float) -> RegularizedState:
    """Inverse chart: the mu = 0 regularized state with the given actions and angles.

    Valid for L > 0, G != 0, G + 2C < 0 and G^2 < 4L^2.
    """
    if G == 0.0:
        raise ValidationError("action-angle chart invalid at G = 0")
    if G + 2.0 * C >= 0.0:
        raise ValidationError("condition G + 2C < 0 violated")
    if L <= 0.0 or G * G >= 4.0 * L * L:
        raise ValidationError("need L > 0 and |G| < 2L")
    s0 = math.sqrt(-G - 2.0 * C)
    a = L / s0
    e = math.sqrt(1.0 - G * G / (4.0 * L * L))
    u = a * (1.0 - e * math.cos(l))
    r = math.sqrt(u)
    theta = (
        g
        + (G / (4.0 * L)) * mean_anomaly_integral(l, e)
        + math.sqrt(L * L - G * G / 4.0) / (2.0 * (-G - 2.0 * C)) * math.sin(l)
    )
    # Radial momentum along u = a(1 - e cos l):
    # R^2 = 4 s0 L e^2 sin^2(l) / (1 - e cos l), sign(R) = sign(sin l).
    R = 2.0 * e * math.sin(l) * math.sqrt(s0 * L / (1.0 - e * math.cos(l)))
    c, sn = math.cos(theta), math.sin(theta)
    return RegularizedState(
        p_xi=R * c - (G / r) * sn,
        p_nu=R * sn + (G / r) * c,
        xi=r * c,
        nu=r * sn,
        C_J=C,
    )


def frequencies(L: float, G: float, C: float):
    """(dl/dtau, dg/dtau) of the mu = 0 action-angle flow at energy C."""
    if G + 2.0 * C >= 0.0:
        raise ValidationError("condition G + 2C < 0 violated")
    s0 = math.sqrt(-G - 2.0 * C)
    return s0, -L / (2.0 * s0)


@dataclass(frozen=True)
class CycleReport:
    """Increments of the conjugate angle pair (l, g + sign(G) l/2) along a cycle."""

    delta_l: float
    delta_pair: float
    G_sign: float


def _unwrap(values):
    out = [values[0]]
    for v in values[1:]:
        prev = out[-1]
        out.append(prev + math.remainder(v - prev, 2.0 * math.pi))
    return out


def angle_consistency_check(states, C: float) -> CycleReport:
    """Total increments of (l, g + sign(G) l/2) along a sampled closed cycle.

    The states must sample the cycle densely enough that consecutive angle
    changes stay below pi; both angles are unwrapped before differencing.
    """
    if len(states) < 3:
        raise ValidationError("need at least 3 samples along the cycle")
    aas = [action_angle_from_state(s, C) for s in states]
    sigma = math.copysign(1.0, aas[0].G)
    ls = _unwrap([aa.l for aa in aas])
    pairs = _unwrap([aa.g + sigma * aa.l / 2.0 for aa in aas])
    return CycleReport(
        delta_l=ls[-1] - ls[0],
        delta_pair=pairs[-1] - pairs[0],
        G_sign=sigma,
    )


def symplecticity_defect(s: RegularizedState, mu: float, h: float = 1e-4) -> float:
    """Max-norm violation of J^T Omega J = Omega for the inverse Levi-Civita map.

    J is the central-difference Jacobian of lc_inverse at s (one Richardson
    step, O(h^4)) in the variable order (p_xi, p_nu, xi, nu) ->
    (p_x, p_y, x, y); Omega is the canonical symplectic form in
    momenta-first ordering.
    """
    z0 = s.as_array()

    def column(j, hh):
        zp, zm = z0.copy(), z0.copy()
        zp[j] += hh
        zm[j] -= hh
        sp = lc_inverse(RegularizedState.from_array(zp, s.C_J), mu)
        sm = lc_inverse(RegularizedState.from_array(zm, s.C_J), mu)
        return (sp.as_array() - sm.as_array()) / (2.0 * hh)

    J = np.empty((4, 4))
    for j in range(4):
        J[:, j] = (4.0 * column(j, h / 2.0) - column(j, h)) / 3.0
    omega = np.block(
        [[np.zeros((2, 2)), -np.eye(2)], [np.eye(2), np.zeros((2, 2))]]
    )
    return float(np.max(np.abs(J.T @ omega @ J - omega)))
