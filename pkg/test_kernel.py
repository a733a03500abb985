#!/usr/bin/env python3
"""
Tests for the subordinator density and the free transition density p^m(t, x)
"""
import math

import numpy as np
import pytest
from scipy import integrate, special

from relkernel.analytics_layer import free_kernel_upper_constants
from relkernel.config import DEFAULT_QUAD, ModelParams, QuadratureConfig
from relkernel.errors import ParameterDomainError
from relkernel.kernel_layer import (_kanter, _outer_quad, _series_density, _series_switch_z, clear_kernel_cache,
                                    free_kernel, free_kernel_comparator, free_kernel_tilted, kernel_table,
                                    standard_subordinator_density, subordinator_cdf, subordinator_density,
                                    theta_bound_constant)
from relkernel.levy_layer import levy_density

CAUCHY = ModelParams(d=1, alpha=1.0)
MASSIVE = ModelParams(d=1, alpha=1.0, m=1.0)


def levy_half_density(z):
    return z ** -1.5 * math.exp(-0.25 / z) / (2.0 * math.sqrt(math.pi))


def test_half_stable_closed_form_value():
    assert subordinator_density(1.0, 1.0, 1.0) == pytest.approx(0.21970, abs=1e-5)
    assert subordinator_density(1.0, 1.0, 1.0) == pytest.approx(math.exp(-0.25) / (2.0 * math.sqrt(math.pi)),
                                                                rel=1e-12)


@pytest.mark.parametrize("z", [0.1, 1.0, 5.0])
def test_kanter_integral_reproduces_the_half_stable_law(z):
    assert _kanter(z, 0.5, DEFAULT_QUAD) == pytest.approx(levy_half_density(z), rel=1e-7)


def test_tail_series_reproduces_the_half_stable_law():
    assert float(_series_density(20.0, 0.5)) == pytest.approx(levy_half_density(20.0), rel=1e-8)


@pytest.mark.parametrize("alpha", [0.5, 1.5])
def test_density_is_continuous_across_the_series_switch(alpha):
    beta = alpha / 2.0
    z = 0.2 ** (-1.0 / beta)
    left = standard_subordinator_density(z * (1.0 - 1e-9), alpha)
    right = standard_subordinator_density(z * (1.0 + 1e-9), alpha)
    assert left == pytest.approx(right, rel=1e-6)


@pytest.mark.parametrize("alpha", [0.5, 1.5])
def test_cdf_is_the_integral_of_the_density(alpha):
    u = 2.0
    integral, _ = integrate.quad(lambda w: math.exp(w) * subordinator_density(1.0, math.exp(w), alpha),
                                 -20.0, math.log(u), limit=200, epsrel=1e-10)
    assert subordinator_cdf(1.0, u, alpha) == pytest.approx(integral, abs=1e-6)


def test_cdf_for_alpha_one_is_erfc():
    assert subordinator_cdf(2.0, 3.0, 1.0) == pytest.approx(math.erfc(2.0 / (2.0 * math.sqrt(3.0))), rel=1e-12)


def test_time_scaling_of_the_subordinator():
    alpha, t, u = 1.5, 0.3, 0.7
    scale = t ** (2.0 / alpha)
    assert subordinator_density(t, u, alpha) == pytest.approx(
        standard_subordinator_density(u / scale, alpha) / scale, rel=1e-12)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_subordinator_density_integrates_to_one(alpha):
    # in w = ln u; the upper edge leaves a tail below e^{-60}
    def integrand(w):
        return math.exp(w) * subordinator_density(1.0, math.exp(w), alpha)

    switch = math.log(_series_switch_z(alpha / 2.0))
    total = integrate.quad(integrand, -30.0, 0.0, limit=200, epsabs=1e-10)[0]
    total += integrate.quad(integrand, 0.0, switch, limit=200, epsabs=1e-10)[0]
    total += integrate.quad(integrand, switch, 250.0, limit=400, epsabs=1e-10)[0]
    assert total == pytest.approx(1.0, abs=1e-6)


def test_theta_bound_constant_is_finite():
    c = theta_bound_constant(1.0)
    assert 0.0 < c < 1.0


def test_subordinator_rejects_bad_arguments():
    with pytest.raises(ParameterDomainError):
        subordinator_density(0.0, 1.0, 1.0)
    with pytest.raises(ParameterDomainError):
        subordinator_density(1.0, 1.0, 2.0)


@pytest.mark.parametrize("t", [0.1, 0.5, 1.0, 2.0])
@pytest.mark.parametrize("x", [0.0, 0.1, 0.5, 1.5, 4.0])
def test_massless_kernel_is_cauchy(t, x):
    expected = t / (math.pi * (t * t + x * x))
    assert free_kernel(t, x, CAUCHY) == pytest.approx(expected, rel=1e-6)


def test_kernel_at_origin_example():
    assert free_kernel(1.0, np.zeros(1), CAUCHY) == pytest.approx(1.0 / math.pi, rel=1e-6)


def test_scaled_kernel_agrees_with_direct_tilt():
    params = ModelParams(1, 1.0, 2.0)
    assert free_kernel(0.5, 0.3, params) == pytest.approx(free_kernel_tilted(0.5, 0.3, params), rel=1e-6)
    params = ModelParams(2, 1.5, 0.5)
    x = np.array([0.2, -0.4])
    assert free_kernel(0.8, x, params) == pytest.approx(free_kernel_tilted(0.8, x, params), rel=1e-6)


def test_kernel_is_a_probability_density():
    params = ModelParams(1, 1.0, 1.0)
    half, _ = integrate.quad(lambda x: free_kernel(1.0, x, params), 0.0, np.inf, limit=200)
    assert 2.0 * half == pytest.approx(1.0, abs=1e-5)


def test_planar_kernel_conserves_mass():
    params = ModelParams(2, 0.5, 1.0)

    def radial(r):
        return 2.0 * math.pi * r * free_kernel(1.0, [r, 0.0], params)

    # the tilted tail decays like e^{-r}
    total = sum(integrate.quad(radial, lo, hi, limit=200, epsabs=1e-10)[0]
                for lo, hi in [(0.0, 1.0), (1.0, 10.0), (10.0, 60.0)])
    assert total == pytest.approx(1.0, abs=1e-5)


@pytest.mark.parametrize("s,t,x,m", [(0.5, 0.5, 0.5, 1.0), (0.3, 0.7, 1.2, 0.5), (1.0, 0.5, -0.4, 2.0),
                                     (0.2, 0.2, 0.0, 1.0), (0.4, 0.6, 2.0, 0.0)])
def test_chapman_kolmogorov(s, t, x, m):
    params = ModelParams(1, 1.0, m)

    def integrand(z):
        return free_kernel(s, x - z, params) * free_kernel(t, z, params)

    total = integrate.quad(integrand, -np.inf, -5.0, limit=200)[0]
    total += integrate.quad(integrand, -5.0, 5.0, points=sorted({0.0, x}), limit=200)[0]
    total += integrate.quad(integrand, 5.0, np.inf, limit=200)[0]
    assert total == pytest.approx(free_kernel(s + t, x, params), rel=1e-4)


@pytest.mark.parametrize("params,t", [(ModelParams(1, 1.0, 1.0), 0.1), (ModelParams(2, 1.5, 0.0), 0.5)])
def test_table_tracks_the_quadrature(params, t):
    table = kernel_table(params, t)
    radii = np.array([0.0, 0.01, 0.1, 0.5, 1.0, 3.0])
    expected = np.array([free_kernel(t, np.eye(params.d)[0] * r, params) for r in radii])
    assert np.allclose(table(radii), expected, rtol=1e-3)
    assert table(0.5) == pytest.approx(float(table(np.array([0.5]))[0]))


def test_cache_clearing_keeps_values():
    params = ModelParams(1, 1.0, 1.0)
    table = kernel_table(params, 0.2)
    before = free_kernel(0.2, [0.3], params)
    assert kernel_table(params, 0.2) is table
    clear_kernel_cache()
    assert kernel_table(params, 0.2) is not table
    assert free_kernel(0.2, [0.3], params) == before


def test_comparator_examples():
    assert free_kernel_comparator(1.0, 0.0, CAUCHY) == 1.0
    assert free_kernel_comparator(1.0, 1.0, CAUCHY) == pytest.approx(1.0 / math.pi)
    assert free_kernel_comparator(0.01, 0.001, CAUCHY) == pytest.approx(100.0)


def test_comparator_takes_the_tail_branch_far_out():
    # j^1(5) = K_1(5) / (5 pi) for d = 1 = alpha
    expected = 0.01 * special.k1(5.0) / (5.0 * math.pi)
    assert free_kernel_comparator(0.01, 5.0, MASSIVE) == pytest.approx(expected, rel=1e-7)
    assert free_kernel_comparator(0.01, 5.0, MASSIVE) == pytest.approx(0.01 * levy_density(5.0, MASSIVE))


@pytest.mark.parametrize("m", [0.25, 1.0])
def test_kernel_lies_in_a_band_around_the_comparator(m):
    params = ModelParams(1, 1.0, m)
    ratios = [free_kernel(t, r, params) / free_kernel_comparator(t, r, params)
              for t in (0.1, 0.5, 1.0) for r in (0.0, 0.1, 1.0, 3.0)]
    assert 0.1 < min(ratios) <= max(ratios) < 10.0


def test_stable_kernel_is_comparable_to_its_power_law():
    params = ModelParams(2, 1.5, 0.0)
    ratios = []
    for t in (0.5, 1.0):
        for r in (0.0, 0.5, 2.0, 5.0):
            near = t ** (-2.0 / 1.5)
            bound = near if r == 0.0 else min(near, t * r ** -3.5)
            ratios.append(free_kernel(t, [r, 0.0], params) / bound)
    assert 0.01 < min(ratios) and max(ratios) < 100.0
    assert max(ratios) / min(ratios) < 20.0


def test_kernel_respects_the_fitted_upper_bounds():
    big_l, m2 = free_kernel_upper_constants(MASSIVE)
    assert 0.0 < big_l < math.inf and 0.0 < m2 < math.inf
    t = 0.3
    for r in (0.45, 0.9, 1.8):
        assert free_kernel(t, r, MASSIVE) <= 2.0 * big_l * t * math.exp(t) * levy_density(r, MASSIVE)
    assert free_kernel(t, 0.0, MASSIVE) <= 2.0 * m2 * (t ** -0.5 + 1.0 / t)


def test_kernel_follows_the_caller_tolerance():
    loose = QuadratureConfig(rel_tol=1e-4, abs_tol=0.0)
    assert _outer_quad(loose).rel_tol == 1e-4
    assert _outer_quad(DEFAULT_QUAD).rel_tol == 1e-9
    params = ModelParams(1, 1.5, 1.0)
    assert free_kernel(0.5, 0.3, params, quad=loose) == pytest.approx(free_kernel(0.5, 0.3, params), rel=1e-3)
    assert free_kernel_tilted(0.5, 0.3, params, quad=loose) == pytest.approx(free_kernel(0.5, 0.3, params),
                                                                             rel=1e-3)


def test_kernel_rejects_nonpositive_time():
    with pytest.raises(ParameterDomainError):
        free_kernel(0.0, 0.0, CAUCHY)
    with pytest.raises(ParameterDomainError):
        free_kernel_comparator(-1.0, 1.0, CAUCHY)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
