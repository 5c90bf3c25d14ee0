import math

import numpy as np
import pytest

from focusfocus import (EMValue, MomentumValue, ScanError, eval_constants,
                        expected_twistless_slope, from_momentum_chart,
                        rotation_number, tilde_s, torus_invariants, twist,
                        twist_via_j_chart, twistless_curve, twistless_point)

TWO_PI = 2.0 * math.pi


class TestTwist:
    def test_divergence_toward_fiber_gamma0(self, champagne0):
        # S scales like 1/|j|^2 along l -> 0 at small fixed h; at h = 0.01
        # the growth from l = 0.05 to l = 0.005 exceeds 10x.  (At h = 0.1
        # |j| is dominated by h and the growth saturates near 1.5x.)
        s_far = twist(champagne0, EMValue(0.01, 0.05))
        s_near = twist(champagne0, EMValue(0.01, 0.005))
        assert abs(s_near) >= 10.0 * abs(s_far)
        # qualitative growth persists at larger h as well
        assert abs(twist(champagne0, EMValue(0.1, 0.005))) > \
            abs(twist(champagne0, EMValue(0.1, 0.05)))

    def test_step_halving_self_consistency(self, champagne):
        c = EMValue(0.05, 0.02)
        s1 = twist(champagne, c)
        s2 = twist(champagne, c, dl_rel=5e-4)
        assert s2 == pytest.approx(s1, rel=1e-4)

    def test_j_chart_form_agrees(self, champagne):
        c = EMValue(0.05, 0.02)
        s_hl = twist(champagne, c)
        s_j = twist_via_j_chart(champagne, c)
        assert s_j == pytest.approx(s_hl, rel=1e-4)

    def test_branch_reference_invariance(self, champagne):
        # shifting the whole stencil by one sheet leaves S unchanged
        c = EMValue(0.05, 0.02)
        s = twist(champagne, c)
        w0 = rotation_number(champagne, c)
        dl = max(1e-6, 1e-3 * abs(c.l))

        def w_up(lv):
            return rotation_number(champagne, EMValue(c.h, lv),
                                   branch_anchor=(c, w0 + 1.0))
        d1 = (w_up(c.l + dl) - w_up(c.l - dl)) / (2 * dl)
        d2 = (w_up(c.l + dl / 2) - w_up(c.l - dl / 2)) / dl
        assert (4 * d2 - d1) / 3 == pytest.approx(s, abs=1e-6)

    def test_invariants_consistency(self, champagne):
        inv = torus_invariants(champagne, EMValue(0.05, 0.02))
        assert inv.W == pytest.approx(inv.omega2 / inv.omega1, abs=1e-10)
        j = MomentumValue((0.05 - 0.5 * 0.02) / math.sqrt(2), 0.02)
        assert inv.S_tilde == pytest.approx(
            TWO_PI * inv.S * j.modulus ** 2, rel=1e-12)


class TestTildeS:
    def test_vanishes_at_origin_along_rays(self, champagne):
        for th in (0.4, 2.1, 4.0):
            vals = []
            for rho in (1e-2, 1e-3, 1e-4):
                j = MomentumValue(rho * math.cos(th), rho * math.sin(th))
                vals.append(abs(tilde_s(champagne,
                                        from_momentum_chart(champagne, j))))
            assert vals[0] > vals[1] > vals[2]

    def test_gradient_at_origin(self, champagne):
        ff = eval_constants(champagne)
        d = 1e-3

        def s_tilde_at(j1, j2):
            return tilde_s(champagne, from_momentum_chart(
                champagne, MomentumValue(j1, j2)))

        g1 = (s_tilde_at(d, 0.0) - s_tilde_at(-d, 0.0)) / (2 * d)
        g2 = (s_tilde_at(0.0, d) - s_tilde_at(0.0, -d)) / (2 * d)
        assert g1 == pytest.approx(ff.A0 ** 2 - 1.0, rel=0.10)
        assert g2 == pytest.approx(-2.0 * ff.A0, rel=0.10)

    def test_gradient_at_origin_pendulum(self, pendulum):
        # degenerate case: gradient (A0^2 - 1, -2 A0) = (-1, 0)
        d = 1e-3

        def s_tilde_at(j1, j2):
            return tilde_s(pendulum, from_momentum_chart(
                pendulum, MomentumValue(j1, j2)))

        g1 = (s_tilde_at(d, 0.0) - s_tilde_at(-d, 0.0)) / (2 * d)
        g2 = (s_tilde_at(0.0, d) - s_tilde_at(0.0, -d)) / (2 * d)
        assert g1 == pytest.approx(-1.0, rel=0.10)
        assert abs(g2) <= 0.05

    def test_leading_form(self, champagne):
        # S~ = A0^2 j1 - 2 A0 j2 - j1 up to O(|j|^2 ln|j|); tested away from
        # the twistless direction where the leading form vanishes
        ff = eval_constants(champagne)
        rho = 1e-3
        bound = 5.0 * rho * math.log(1.0 / rho)
        for th in (0.3, 1.8, 3.6, 5.2):
            j = MomentumValue(rho * math.cos(th), rho * math.sin(th))
            lead = (ff.A0 ** 2 - 1.0) * j.j1 - 2.0 * ff.A0 * j.j2
            val = tilde_s(champagne, from_momentum_chart(champagne, j))
            assert abs(val - lead) <= bound * abs(lead)


class TestTwistlessPoint:
    @pytest.mark.parametrize("h", [0.02, -0.02, 0.05, -0.05])
    def test_unique_root_per_energy(self, champagne, h):
        l_star, resid = twistless_point(champagne, h)
        assert abs(resid) <= 1e-6
        assert np.sign(l_star) == -np.sign(h)

    def test_root_count_stable_under_refinement(self, champagne):
        l64, _ = twistless_point(champagne, 0.02, n_scan=64)
        l128, _ = twistless_point(champagne, 0.02, n_scan=128)
        assert l64 == pytest.approx(l128, abs=1e-10)

    def test_position_approaches_eq19_ratio(self, champagne):
        # l*(h)/h -> (omega^2 - alpha^2)/(omega (omega^2 + alpha^2))
        ff = eval_constants(champagne)
        target = 1.0 / expected_twistless_slope(ff.alpha, ff.omega)
        errs = []
        for h in (0.02, 0.01, 0.005):
            l_star, _ = twistless_point(champagne, h)
            errs.append(abs(l_star / h - target))
        assert errs[0] > errs[-1]
        assert errs[-1] <= 0.15 * abs(target)

    def test_h_zero_rejected(self, champagne):
        with pytest.raises(ValueError):
            twistless_point(champagne, 0.0)

    def test_no_root_reported(self, champagne0):
        # omega = 0: no twistless torus on the negative-h side in the window
        with pytest.raises(ScanError, match="no twistless"):
            twistless_point(champagne0, -0.01,
                            l_range=(1e-4, 0.15))


class TestTwistlessCurve:
    @pytest.fixture(scope="class")
    def curve(self, champagne):
        return twistless_curve(
            champagne, [0.005, -0.005, 0.01, -0.01, 0.02, -0.02])

    def test_tangent_slope(self, champagne):
        curve = twistless_curve(
            champagne, [0.005, -0.005, 0.01, -0.01, 0.02, -0.02])
        assert not curve.degenerate
        assert curve.expected_slope == pytest.approx(-9.0 / 14.0, abs=1e-9)
        assert curve.tangent_slope_fit == pytest.approx(
            curve.expected_slope, rel=0.15)
        # curve passes through the origin: |l*| -> 0 with h
        ordered = sorted(curve.samples, key=lambda s: abs(s.h))
        assert abs(ordered[0].l_star) < abs(ordered[-1].l_star)

    def test_degenerate_gamma0(self, champagne0):
        curve = twistless_curve(champagne0,
                                [0.002, -0.002, 0.005, -0.005, 0.01, -0.01])
        assert curve.degenerate
        assert math.isnan(curve.tangent_slope_fit)
        assert len(curve.ratios) >= 3
        # transversality lost: |h|/|l*| -> 0 toward the origin
        assert all(a > b for a, b in zip(curve.ratios, curve.ratios[1:]))
        assert curve.ratios[-1] < 0.15

    def test_degenerate_pendulum(self, pendulum):
        curve = twistless_curve(pendulum,
                                [0.003, -0.003, 0.007, -0.007, 0.015, -0.015])
        assert curve.degenerate
        assert len(curve.ratios) >= 3
        assert all(a > b for a, b in zip(curve.ratios, curve.ratios[1:]))
