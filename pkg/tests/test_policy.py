import math

import numpy as np
import pytest
from scipy.special import erf

from mtgg.errors import DomainError
from mtgg.gaussian import McConfig
from mtgg.policy import (
    AffinePolicy,
    BeliefContext,
    GameParams,
    apply_policy,
    belief,
    belief_array,
    best_response_actions,
    br_lhs_minus_rhs,
    diffuse_F,
    mc_belief,
    min_policy,
    switching_G,
    switching_G1,
    switching_G2,
    switching_curve,
    switching_curve_point,
    switching_curve_slope,
)

CURVE_GAME = GameParams(1.0, 2.0, 1.0, 1.0, 10, 4)
DIFFUSE = GameParams(1.0, 1.0, 1.0, 1.0, 10, 4, diffuse=True)


def hand_G(xi, y2, s1, s2, al1, al2, rho, a1, a2, tau):
    """Switching function written out from scratch, no package helpers."""
    d1, d2 = s1 / (s1 + al1), s2 / (s2 + al2)
    v1, v2 = al1 * s1 / (s1 + al1), al2 * s2 / (s2 + al2)
    den = math.sqrt(a1 * a1 * al1 + a2 * a2 * al2)
    wv = (a1 * a1 * v1 + a2 * a2 * v2) / den ** 2
    c = (tau - d1 * a1 * xi - d2 * a2 * y2) / den
    phi = 0.5 * (1 + erf(c / math.sqrt(1 + wv) / math.sqrt(2)))
    return phi - 0.5 - rho / 2 * (d1 * xi - d2 * y2)


def own_two_stage_mc(params, pol, y, n, seed):
    rng = np.random.default_rng(seed)
    d1 = params.sigma1_sq / (params.sigma1_sq + params.alpha1_sq)
    d2 = params.sigma2_sq / (params.sigma2_sq + params.alpha2_sq)
    v1 = d1 * params.alpha1_sq
    v2 = d2 * params.alpha2_sq
    th = np.column_stack([d1 * y[0] + math.sqrt(v1) * rng.standard_normal(n),
                          d2 * y[1] + math.sqrt(v2) * rng.standard_normal(n)])
    s = th + np.sqrt([params.alpha1_sq, params.alpha2_sq]) * rng.standard_normal((n, 2))
    hit = (pol.a1 * s[:, 0] + pol.a2 * s[:, 1] <= pol.tau).astype(float)
    return hit.mean(), hit.std(ddof=1) / math.sqrt(n)


class TestGameParams:
    def test_density(self):
        assert CURVE_GAME.rho == 0.4
        assert GameParams.from_density(0.3, 10).degree == 3

    @pytest.mark.parametrize("kw", [dict(degree=0), dict(degree=10), dict(n_agents=1),
                                    dict(sigma1_sq=0.0), dict(alpha2_sq=-1.0)])
    def test_invalid(self, kw):
        base = dict(sigma1_sq=1.0, sigma2_sq=1.0, alpha1_sq=1.0, alpha2_sq=1.0, n_agents=10, degree=4)
        base.update(kw)
        with pytest.raises(DomainError):
            GameParams(**base)


class TestAffinePolicy:
    @pytest.mark.parametrize("y,act", [((0.3, 0.7), 1), ((0.7, 0.3), 2), ((0.5, 0.5), 1),
                                       ((2, 3), 1), ((3, 2), 2)])
    def test_min_policy(self, y, act):
        assert min_policy() == AffinePolicy(1.0, -1.0, 0.0)
        assert apply_policy(min_policy(), y) == act

    def test_scaling_invariance(self):
        p = AffinePolicy(1.0, -0.7, 0.4)
        rng = np.random.default_rng(0)
        y1, y2 = rng.normal(size=(2, 500))
        np.testing.assert_array_equal(p.actions(y1, y2), p.scaled(3.5).actions(y1, y2))
        assert p.scaled(2.0).normalized() == p

    def test_constant(self):
        y = np.linspace(-1e6, 1e6, 7)
        assert (AffinePolicy.constant(1).actions(y, -y) == 1).all()
        assert (AffinePolicy.constant(2).actions(y, -y) == 2).all()


class TestBelief:
    def test_diffuse_origin(self):
        ctx = BeliefContext.from_params(DIFFUSE, min_policy())
        assert ctx.w_var == 1.0
        assert belief(ctx, (0.0, 0.0)) == pytest.approx(0.5, abs=1e-15)

    def test_diffuse_saturation(self):
        ctx = BeliefContext.from_params(DIFFUSE, min_policy())
        assert belief(ctx, (-1e3, 0.0)) == pytest.approx(1.0, abs=1e-12)

    def test_against_independent_monte_carlo(self):
        params = GameParams(1.0, 2.0, 1.0, 1.0, 10, 4)
        pol = AffinePolicy(1.0, -2.0, 0.0)
        ctx = BeliefContext.from_params(params, pol)
        val = belief(ctx, (1.0, 0.5))
        assert 0 < val < 1
        m, se = own_two_stage_mc(params, pol, (1.0, 0.5), 10**6, 99)
        assert abs(val - m) <= 3 * se
        m2, se2 = mc_belief(ctx, (1.0, 0.5), McConfig(10**6, 7))
        assert abs(val - m2) <= 3 * se2

    def test_array_matches_scalar(self):
        ctx = BeliefContext.from_params(CURVE_GAME, AffinePolicy(1.0, -2.0, 0.3))
        y1 = np.linspace(-3, 3, 13)
        y2 = np.linspace(2, -2, 13)
        np.testing.assert_allclose(belief_array(ctx, y1, y2),
                                   [belief(ctx, (a, b)) for a, b in zip(y1, y2)], atol=1e-14)

    def test_zero_weight_policy(self):
        with pytest.raises(DomainError):
            AffinePolicy(0.0, 0.0, 1.0)


class TestDiffuseMargin:
    def test_diagonal(self):
        for t in (-40.0, -1.0, 0.0, 2.5, 33.0):
            assert abs(diffuse_F(DIFFUSE, (t, t))) <= 1e-12

    def test_sign_and_antisymmetry(self):
        up = diffuse_F(DIFFUSE, (0.0, 1.0))
        down = diffuse_F(DIFFUSE, (1.0, 0.0))
        assert up > 0 and down < 0
        assert up == pytest.approx(-down, rel=1e-14)

    def test_small_gap(self):
        p = GameParams(1.0, 1.0, 1.0, 1.0, 10, 1, diffuse=True)
        assert diffuse_F(p, (0.0, 1e-6)) > 0

    def test_far_from_diagonal(self):
        # task 1 is far cheaper: best response is task 1
        assert diffuse_F(DIFFUSE, (0.0, 10.0)) > 0

    def test_matches_full_margin(self):
        rng = np.random.default_rng(3)
        for y in rng.uniform(-5, 5, (20, 2)):
            full = br_lhs_minus_rhs(DIFFUSE, min_policy(), tuple(y))
            assert full / DIFFUSE.degree == pytest.approx(diffuse_F(DIFFUSE, tuple(y)), abs=1e-12)

    def test_requires_diffuse(self):
        with pytest.raises(DomainError):
            diffuse_F(CURVE_GAME, (0.0, 0.0))


class TestSwitchingFunction:
    def test_against_hand_written(self):
        pol = AffinePolicy(1.3, -0.6, 0.8)
        for xi, y2 in [(0.0, 0.0), (1.5, -2.0), (-4.0, 3.0)]:
            want = hand_G(xi, y2, 1.0, 2.0, 1.0, 1.0, 0.4, 1.3, -0.6, 0.8)
            assert switching_G(CURVE_GAME, pol, xi, y2) == pytest.approx(want, abs=1e-14)

    def test_limits(self):
        pol = AffinePolicy(1.0, -2.0, 0.0)
        assert switching_G1(CURVE_GAME, pol, -1e4, 0.0) == pytest.approx(1.0)
        assert switching_G1(CURVE_GAME, pol, 1e4, 0.0) == pytest.approx(0.0)
        assert switching_G2(CURVE_GAME, pol, -1e4, 0.0) < -100
        assert switching_G(CURVE_GAME, pol, -1e4, 0.0) > 100
        assert switching_G(CURVE_GAME, pol, 1e4, 0.0) < -100

    def test_diffuse_origin(self):
        assert switching_G(DIFFUSE, min_policy(), 0.0, 0.0) == pytest.approx(0.0, abs=1e-15)


class TestSwitchingCurve:
    @pytest.mark.parametrize("y2", [-3.0, 0.0, 3.0])
    def test_diffuse_diagonal(self, y2):
        xi, _ = switching_curve_point(DIFFUSE, min_policy(), y2)
        assert xi == pytest.approx(y2, abs=1e-9)

    # frozen from a sign scan of hand_G over [-50, 50] at step 1e-4
    @pytest.mark.parametrize("y2,lo,hi", [(3.0, 5.6166, 5.6167), (-7.5, -13.6625, -13.6624)])
    def test_dense_scan_oracle(self, y2, lo, hi):
        xi, _ = switching_curve_point(CURVE_GAME, AffinePolicy(1.0, -2.0, 0.0), y2)
        assert lo <= xi <= hi

    def test_root_and_bracket(self):
        pol = AffinePolicy(1.0, -2.0, 0.0)
        y2 = np.linspace(-20, 20, 41)
        g, iters = switching_curve(CURVE_GAME, pol, y2, tol=1e-10)
        vals = np.array([switching_G(CURVE_GAME, pol, x, y) for x, y in zip(g, y2)])
        assert np.all(np.abs(vals) < 1e-9)
        assert np.all(iters >= 0)

    def test_increasing_example(self):
        y2 = np.linspace(-20, 20, 200)
        g, _ = switching_curve(CURVE_GAME, AffinePolicy(1.0, -2.0, 0.0), y2)
        assert np.all(np.diff(g) > 0)

    def test_needs_positive_a1(self):
        with pytest.raises(DomainError):
            switching_curve(CURVE_GAME, AffinePolicy(-1.0, -1.0, 0.0), [0.0])
        with pytest.raises(DomainError):
            switching_curve(CURVE_GAME, AffinePolicy.constant(1), [0.0])

    def test_best_response_side(self):
        pol = AffinePolicy(1.0, -2.0, 0.5)
        y2 = np.array([-2.0, 0.0, 4.0])
        g, _ = switching_curve(CURVE_GAME, pol, y2)
        np.testing.assert_array_equal(best_response_actions(CURVE_GAME, pol, g - 1e-3, y2), [1, 1, 1])
        np.testing.assert_array_equal(best_response_actions(CURVE_GAME, pol, g + 1e-3, y2), [2, 2, 2])
        for x, y in zip(g, y2):
            assert br_lhs_minus_rhs(CURVE_GAME, pol, (x - 1e-3, y)) > 0
            assert br_lhs_minus_rhs(CURVE_GAME, pol, (x + 1e-3, y)) < 0


class TestSlope:
    def test_diffuse_slope_one(self):
        for y2 in (-5.0, 0.0, 7.0):
            assert switching_curve_slope(DIFFUSE, min_policy(), y2) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("y2", [-10.0, 0.0, 10.0])
    def test_positive_example(self, y2):
        assert switching_curve_slope(CURVE_GAME, AffinePolicy(1.0, -2.0, 0.0), y2) > 0

    @pytest.mark.parametrize("y2", [-6.0, -1.0, 0.5, 8.0])
    def test_finite_difference(self, y2):
        pol = AffinePolicy(1.0, -2.0, 0.0)
        h = 1e-4
        fd = (switching_curve_point(CURVE_GAME, pol, y2 + h, tol=1e-13)[0]
              - switching_curve_point(CURVE_GAME, pol, y2 - h, tol=1e-13)[0]) / (2 * h)
        assert switching_curve_slope(CURVE_GAME, pol, y2) == pytest.approx(fd, rel=1e-5)
