import math

import numpy as np
import pytest
from scipy import integrate

from mtgg.errors import DomainError
from mtgg.gaussian import (
    McConfig,
    expected_cdf_shift,
    expected_pdf_shift,
    make_rng,
    mc_expected_cdf_shift,
    normal_cdf_array,
    posterior_params,
    std_normal_cdf,
    std_normal_pdf,
)


def erf_cdf(x):
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def quad_expectation(f, c, v):
    """E[f(c - W)] for W ~ N(0, v) by adaptive quadrature."""
    s = math.sqrt(v)
    val, _ = integrate.quad(lambda w: f(c - s * w) * math.exp(-0.5 * w * w) / math.sqrt(2 * math.pi),
                            -40, 40, limit=200)
    return val


class TestStdNormal:
    def test_symmetry_point(self):
        assert std_normal_cdf(0.0) == 0.5

    def test_saturation(self):
        assert abs(std_normal_cdf(40.0) - 1.0) <= 1e-12
        assert std_normal_cdf(-40.0) < 1e-300

    def test_against_erf(self):
        assert std_normal_cdf(1.0) == pytest.approx(0.8413447460685429, abs=1e-15)
        for x in np.linspace(-8, 8, 33):
            assert std_normal_cdf(x) == pytest.approx(erf_cdf(x), abs=1e-15)

    def test_lower_tail_keeps_precision(self):
        # erf-based 1 + erf(x) cancels to zero here, erfc does not
        assert std_normal_cdf(-30.0) == pytest.approx(4.906713927148187e-198, rel=1e-12)

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_non_finite(self, bad):
        with pytest.raises(DomainError):
            std_normal_cdf(bad)

    def test_pdf(self):
        assert std_normal_pdf(0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)

    def test_array_matches_scalar(self):
        xs = np.linspace(-6, 6, 101)
        np.testing.assert_allclose(normal_cdf_array(xs), [std_normal_cdf(x) for x in xs], atol=1e-15)


class TestPosterior:
    def test_examples(self):
        p = posterior_params(2.0, 1.0)
        assert p.d == pytest.approx(2 / 3) and p.sigma_tilde_sq == pytest.approx(2 / 3)
        p = posterior_params(1.0, 1.0)
        assert (p.d, p.sigma_tilde_sq) == (0.5, 0.5)

    def test_diffuse(self):
        p = posterior_params(123.0, 1.0, diffuse=True)
        assert (p.d, p.sigma_tilde_sq) == (1.0, 1.0)
        p = posterior_params(1.0, 0.3, diffuse=True)
        assert (p.d, p.sigma_tilde_sq) == (1.0, 0.3)

    def test_large_prior_approaches_diffuse(self):
        p = posterior_params(1e12, 2.0)
        assert p.d == pytest.approx(1.0, abs=1e-11)
        assert p.sigma_tilde_sq == pytest.approx(2.0, rel=1e-11)

    @pytest.mark.parametrize("args", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0), (1.0, math.nan)])
    def test_rejects_bad_variances(self, args):
        with pytest.raises(DomainError):
            posterior_params(*args)


class TestCdfShift:
    def test_half_at_origin(self):
        assert abs(expected_cdf_shift(0.0, 1.0) - 0.5) <= 1e-12

    def test_degenerate(self):
        assert expected_cdf_shift(1.0, 0.0) == pytest.approx(erf_cdf(1.0), abs=1e-15)

    def test_variance_three(self):
        assert expected_cdf_shift(1.0, 3.0) == pytest.approx(erf_cdf(0.5), abs=1e-15)

    @pytest.mark.parametrize("c,v", [(0.3, 0.5), (-2.0, 4.0), (5.0, 0.01), (1.5, 20.0)])
    def test_against_quadrature(self, c, v):
        assert expected_cdf_shift(c, v) == pytest.approx(quad_expectation(erf_cdf, c, v), abs=1e-10)

    @pytest.mark.parametrize("c,v", [(0.3, 0.5), (-2.0, 4.0), (0.0, 1.0)])
    def test_pdf_against_quadrature(self, c, v):
        pdf = lambda x: math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
        assert expected_pdf_shift(c, v) == pytest.approx(quad_expectation(pdf, c, v), abs=1e-10)

    def test_negative_variance(self):
        with pytest.raises(DomainError):
            expected_cdf_shift(0.0, -1e-9)


class TestMonteCarlo:
    def test_half_at_origin_mc(self):
        est, se = mc_expected_cdf_shift(0.0, 1.0, McConfig(10**6, 0))
        assert abs(est - 0.5) <= 3 * se

    def test_zero_variance_exact(self):
        est, se = mc_expected_cdf_shift(0.0, 0.0, McConfig(10, 3))
        assert est == 0.5 and se == 0.0

    def test_cross_check_closed_form(self):
        est, se = mc_expected_cdf_shift(2.0, 1.0, McConfig(10**6, 1))
        assert abs(est - expected_cdf_shift(2.0, 1.0)) <= 3 * se

    def test_single_sample_has_infinite_se(self):
        _, se = mc_expected_cdf_shift(0.0, 1.0, McConfig(1, 0))
        assert se == math.inf

    def test_config_validation(self):
        with pytest.raises(DomainError):
            McConfig(0)

    def test_seeded_streams(self):
        a = make_rng(5, 1).standard_normal(8)
        b = make_rng(5, 1).standard_normal(8)
        c = make_rng(5, 2).standard_normal(8)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)
