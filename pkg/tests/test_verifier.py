"""Full-problem verifier tests: vector field and variational block, Newton
shooting for the symmetric resonant orbits, monodromy structure, and the
mu -> 0 extrapolation of (tr M - 4)/mu against the quadrature."""

import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from rtbp_resonance.coefficient import compute_C
from rtbp_resonance.errors import CollisionError, ConvergenceError, ValidationError
from rtbp_resonance.kepler import RtbpState
from rtbp_resonance.perturbation import ResonantFamily, canonical_families
from rtbp_resonance.verifier import (
    extrapolate_C,
    monodromy,
    refine_periodic_orbit,
    rtbp_derivatives,
    rtbp_hamiltonian,
)

MU = 1e-5


def _integrate(s0, t, mu, tol=1e-12):
    sol = solve_ivp(
        lambda _, z: rtbp_derivatives(z, mu),
        (0.0, t),
        np.asarray(s0, dtype=float),
        method="DOP853",
        rtol=tol,
        atol=tol,
        dense_output=True,
    )
    assert sol.success
    return sol


class TestDerivatives:
    def test_circular_orbit_is_equilibrium(self):
        s = RtbpState(p_x=0.0, p_y=1.0, x=1.0, y=0.0)
        assert np.max(np.abs(rtbp_derivatives(s, 0.0))) == 0.0

    def test_energy_conserved_along_arc(self):
        s0 = np.array([0.1, 0.9, 1.1, 0.0])
        sol = _integrate(s0, 15.0, 1e-3)
        H0 = rtbp_hamiltonian(s0, 1e-3)
        drift = max(abs(rtbp_hamiltonian(sol.sol(t), 1e-3) - H0) for t in np.linspace(0, 15, 40))
        assert drift <= 1e-11

    def test_variational_block_matches_finite_differences(self):
        mu = 1e-3
        z0 = np.array([0.2, 0.8, 0.9, 0.3])
        _, J = rtbp_derivatives(z0, mu, with_variational=True)
        h = 1e-6
        for j in range(4):
            zp, zm = z0.copy(), z0.copy()
            zp[j] += h
            zm[j] -= h
            col = (rtbp_derivatives(zp, mu) - rtbp_derivatives(zm, mu)) / (2 * h)
            assert np.max(np.abs(J[:, j] - col)) <= 1e-7

    def test_collision_guard(self):
        with pytest.raises(CollisionError):
            rtbp_derivatives(np.array([0.0, 0.0, 1.0 - 1e-3, 0.0]), 1e-3)


class TestRefinement:
    def test_period_near_unperturbed(self):
        o = refine_periodic_orbit(ResonantFamily(1, 3, 0.3), MU)
        assert abs(o.period - 2.0 * math.pi) <= 10.0 * MU * 2.0 * math.pi
        assert o.initial_state.y == 0.0 and o.initial_state.p_x == 0.0
        assert max(o.residual_y, o.residual_px) <= 1e-10

    def test_small_mu_limit_recovers_seed(self):
        f = ResonantFamily(1, 3, 0.3)
        o = refine_periodic_orbit(f, 1e-7)
        a = f.semimajor_axis
        assert o.initial_state.x == pytest.approx(a * (1 - f.e), abs=1e-4)
        assert o.period == pytest.approx(2.0 * math.pi, abs=1e-4)

    def test_retrograde_reversed_circulation(self):
        o = refine_periodic_orbit(ResonantFamily(1, 2, 0.2, direction="retrograde"), MU)
        # angular momentum x0 * p_y(0) is negative for the reversed sense
        assert o.initial_state.x * o.initial_state.p_y < 0.0
        assert max(o.residual_y, o.residual_px) <= 1e-10

    def test_orbit_closes(self):
        o = refine_periodic_orbit(ResonantFamily(1, 3, 0.3, n_l=1), MU, tol=1e-12)
        s0 = o.initial_state.as_array()
        # measured with a tighter integration than the shooting default so the
        # measurement error sits below the claimed closure
        sf = _integrate(s0, o.period, MU, tol=1e-13).y[:, -1]
        assert np.max(np.abs(sf - s0)) <= 1e-10

    def test_reflection_symmetry_about_half_period(self):
        o = refine_periodic_orbit(ResonantFamily(1, 3, 0.3), MU, tol=1e-12)
        sol = _integrate(o.initial_state.as_array(), o.period, MU)
        for s in (0.3, 1.1, 2.0):
            a = sol.sol(o.period / 2 + s)
            b = sol.sol(o.period / 2 - s)
            mirror = np.array([-b[0], b[1], b[2], -b[3]])
            assert np.max(np.abs(a - mirror)) <= 1e-9

    def test_mu_out_of_range(self):
        with pytest.raises(ValidationError):
            refine_periodic_orbit(ResonantFamily(1, 3, 0.3), 0.1)

    def test_newton_divergence_reported(self):
        # a deliberately absurd tolerance cannot be met
        with pytest.raises(ConvergenceError):
            refine_periodic_orbit(ResonantFamily(1, 3, 0.3), MU, tol=1e-16)


@pytest.fixture(scope="module")
def reports():
    out = {}
    for f in canonical_families(1, 3, 0.3):
        out[(f.n_l, f.n_g)] = monodromy(refine_periodic_orbit(f, MU))
    return out


class TestMonodromy:
    def test_symplectic_determinant(self, reports):
        for rep in reports.values():
            assert abs(rep.determinant - 1.0) <= 1e-8

    def test_eigenvalue_structure(self, reports):
        for rep in reports.values():
            eig = sorted(rep.eigenvalues, key=lambda z: abs(z - 1.0))
            # two unit multipliers from energy conservation / phase shift
            assert abs(eig[0] - 1.0) <= 1e-4 and abs(eig[1] - 1.0) <= 1e-4
            # the other two are reciprocal
            assert abs(eig[2] * eig[3] - 1.0) <= 1e-9

    def test_estimate_tracks_quadrature(self, reports):
        for (n_l, n_g), rep in reports.items():
            f = ResonantFamily(1, 3, 0.3, n_l, n_g)
            c_quad = compute_C(f).C
            assert rep.C_estimate == pytest.approx(c_quad, rel=0.05)

    def test_stability_classification(self, reports):
        for (n_l, n_g), rep in reports.items():
            c = compute_C(ResonantFamily(1, 3, 0.3, n_l, n_g)).C
            offs = sorted(abs(abs(z) - 1.0) for z in rep.eigenvalues)[-1]
            if c > 0.0:
                assert offs > 1e-3  # hyperbolic: a real pair off the circle
            else:
                assert offs < 1e-6  # elliptic: all multipliers on the circle

    def test_trace_approaches_four(self):
        mu = 3e-6
        rep = monodromy(refine_periodic_orbit(ResonantFamily(1, 3, 0.3), mu))
        c = compute_C(ResonantFamily(1, 3, 0.3)).C
        assert abs(rep.trace - 4.0) <= 2.0 * abs(c) * mu


class TestExtrapolation:
    def test_input_validation(self):
        f = ResonantFamily(1, 3, 0.3)
        with pytest.raises(ValidationError):
            extrapolate_C(f, mu_list=(1e-5,))
        with pytest.raises(ValidationError):
            extrapolate_C(f, mu_list=(1e-5, 1e-4))

    def test_both_families_match_quadrature(self):
        for f in canonical_families(1, 3, 0.3):
            res = extrapolate_C(f)
            c_quad = compute_C(f).C
            assert res.C == pytest.approx(c_quad, rel=0.01)
            assert len(res.estimates) == 4
        # opposite signs of the two families
        r1 = extrapolate_C(canonical_families(1, 3, 0.3)[0])
        r2 = extrapolate_C(canonical_families(1, 3, 0.3)[1])
        assert r1.C * r2.C < 0.0
