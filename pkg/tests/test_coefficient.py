"""Quadrature tests for the stability coefficient: convergence, the C1/C2
split, equality of the three formulations, collision handling, scaling laws,
and eccentricity sweeps."""

import math

import numpy as np
import pytest

from rtbp_resonance.coefficient import (
    _trapezoid_pair,
    compute_C,
    compute_C_via_omega_gg,
    compute_C_via_omega_ll,
    min_delta1,
    sweep_e,
)
from rtbp_resonance.errors import CollisionError, ConvergenceError
from rtbp_resonance.perturbation import ResonantFamily, canonical_families


def _fit_slope(p, q, direction, which, e_grid=(0.003, 0.006, 0.012, 0.024)):
    vals = []
    for e in e_grid:
        f = canonical_families(p, q, e, direction)[which]
        vals.append(abs(compute_C(f, tol=1e-13).C))
    return np.polyfit(np.log(e_grid), np.log(vals), 1)[0]


class TestComputeC:
    def test_split_assembly(self):
        res = compute_C(ResonantFamily(1, 3, 0.3), tol=1e-10)
        assert res.C == pytest.approx(-6.0 * math.pi * (res.C1 + res.C2), rel=1e-12)
        assert res.err_estimate < 1e-10
        assert res.min_delta1 > 0.0

    def test_spectral_convergence(self):
        f = ResonantFamily(2, 7, 0.4)
        ref = sum(_trapezoid_pair(f, 8192))
        errs = [abs(sum(_trapezoid_pair(f, n)) - ref) for n in (256, 512, 1024)]
        for a, b in zip(errs, errs[1:]):
            if a < 1e-14:
                break
            assert b <= a / 4.0

    def test_vanishes_with_eccentricity(self):
        # C = O(e^2) for the 1:3 resonance.
        c_small = compute_C(ResonantFamily(1, 3, 1e-3), tol=1e-13).C
        c_mid = compute_C(ResonantFamily(1, 3, 1e-2), tol=1e-13).C
        assert abs(c_small) < 1e-3
        assert abs(c_small) == pytest.approx(abs(c_mid) * 1e-2, rel=0.05)

    def test_c2_vanishes_unless_q_is_1(self):
        assert abs(compute_C(ResonantFamily(2, 3, 0.3), tol=1e-12).C2) <= 1e-12
        assert abs(compute_C(ResonantFamily(2, 1, 0.3), tol=1e-12).C2) > 1e-3

    def test_collision_guard(self):
        # 3:1 resonance: a = 3^(2/3); the conjunction at theta = 0 hits the
        # small primary when a(1 - e) = 1.
        e_star = 1.0 - 3.0 ** (-2.0 / 3.0)
        with pytest.raises(CollisionError):
            compute_C(ResonantFamily(3, 1, e_star))
        assert min_delta1(ResonantFamily(3, 1, e_star)) < 1e-6

    def test_node_cap(self):
        with pytest.raises(ConvergenceError):
            compute_C(ResonantFamily(1, 3, 0.3), tol=0.0)

    def test_retrograde_value_finite_and_smaller(self):
        res = compute_C(ResonantFamily(1, 2, 0.2, direction="retrograde"), tol=1e-12)
        assert res.C == pytest.approx(-1.0162052346731067, rel=1e-9)


class TestFormulationEquivalence:
    @pytest.mark.parametrize(
        "family",
        [
            ResonantFamily(1, 3, 0.3),
            ResonantFamily(2, 7, 0.4),
            ResonantFamily(1, 2, 0.2, direction="retrograde"),
        ],
        ids=["1:3 direct", "2:7 direct", "1:2 retrograde"],
    )
    def test_three_formulations_agree(self, family):
        c_track = compute_C(family, tol=1e-12).C
        c_ll = compute_C_via_omega_ll(family)
        c_gg = compute_C_via_omega_gg(family)
        assert c_ll == pytest.approx(c_track, abs=1e-8 * max(1.0, abs(c_track)))
        assert c_gg == pytest.approx(c_track, abs=1e-8 * max(1.0, abs(c_track)))


class TestScaling:
    def test_direct_order_of_vanishing(self):
        assert _fit_slope(1, 3, "direct", 0) == pytest.approx(2.0, abs=0.05)
        assert _fit_slope(2, 7, "direct", 1) == pytest.approx(5.0, abs=0.05)

    def test_retrograde_order_of_vanishing(self):
        assert _fit_slope(1, 2, "retrograde", 0) == pytest.approx(3.0, abs=0.05)

    def test_family_sum_decays_one_order_faster(self):
        e_grid = (0.003, 0.006, 0.012, 0.024)
        m = 2  # 1:3 leading exponent
        sums, firsts = [], []
        for e in e_grid:
            f1, f2 = canonical_families(1, 3, e)
            c1 = compute_C(f1, tol=1e-13).C
            c2 = compute_C(f2, tol=1e-13).C
            sums.append(abs(c1 + c2))
            firsts.append(abs(c1))
        slope_sum = np.polyfit(np.log(e_grid), np.log(sums), 1)[0]
        slope_first = np.polyfit(np.log(e_grid), np.log(firsts), 1)[0]
        assert slope_first == pytest.approx(m, abs=0.1)
        assert slope_sum >= m + 0.9


class TestSweep:
    def test_opposite_signs(self):
        rows = sweep_e(1, 3, "direct", [0.1, 0.2, 0.3], tol=1e-10)
        assert [r.e for r in rows] == [0.1, 0.2, 0.3]
        for r in rows:
            assert r.status_1 == r.status_2 == "ok"
            assert r.C_family1 * r.C_family2 < 0.0

    def test_collision_rows_flagged_not_dropped(self):
        e_star = 1.0 - 3.0 ** (-2.0 / 3.0)
        rows = sweep_e(3, 1, "direct", [0.1, e_star], tol=1e-10)
        assert len(rows) == 2
        assert rows[0].status_1 == "ok"
        assert rows[1].status_1 == "collision"
        assert rows[1].C_family1 is None
        assert rows[1].min_delta1_1 is not None

    def test_parallel_map_matches_serial(self):
        from multiprocessing import get_context

        grid = [0.1, 0.2]
        serial = sweep_e(1, 3, "direct", grid)
        with get_context("spawn").Pool(2) as pool:
            parallel = sweep_e(1, 3, "direct", grid, map_fn=pool.map)
        assert serial == parallel
