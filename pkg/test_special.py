#!/usr/bin/env python3
"""
Tests for the special functions psi, phi, xi, sigma and the stable constant
"""
import math

import numpy as np
import pytest
from scipy import special

from relkernel.config import ModelParams
from relkernel.errors import ParameterDomainError
from relkernel.special_layer import (one_minus_psi, phi, psi, psi_closed_form, sigma, sphere_area,
                                     stable_constant, tail_bound_constant, xi, xi_bound_constant)

CAUCHY = ModelParams(d=1, alpha=1.0)


def test_psi_at_zero_is_one():
    for d, alpha in [(1, 0.5), (2, 1.0), (3, 1.5)]:
        assert abs(psi(0.0, ModelParams(d, alpha)) - 1.0) < 1e-10


def test_psi_matches_bessel_k1_when_d_plus_alpha_is_two():
    value = psi(1.0, CAUCHY)
    assert value == pytest.approx(0.60191, abs=1e-5)
    assert value == pytest.approx(special.k1(1.0), rel=1e-6)


@pytest.mark.parametrize("d,alpha", [(1, 0.5), (1, 1.5), (2, 1.0), (3, 1.5)])
@pytest.mark.parametrize("r", [0.01, 0.3, 1.0, 4.0, 20.0])
def test_quadrature_agrees_with_closed_form(d, alpha, r):
    params = ModelParams(d, alpha)
    assert psi(r, params) == pytest.approx(psi_closed_form(r, params), rel=1e-8)


def test_psi_is_decreasing():
    params = ModelParams(2, 1.5)
    values = [psi(r, params) for r in np.linspace(0.0, 10.0, 25)]
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_one_minus_psi_is_the_complement():
    params = ModelParams(2, 1.0)
    for r in (0.5, 1.0, 3.0):
        assert one_minus_psi(r, params) + psi(r, params) == pytest.approx(1.0, abs=1e-9)
    assert one_minus_psi(0.0, params) == 0.0
    assert 0.0 < one_minus_psi(1e-3, params) < 1e-5


def test_negative_radius_is_rejected():
    with pytest.raises(ParameterDomainError):
        psi(-1.0, CAUCHY)


def test_phi_value():
    expected = math.exp(-1.5) * (1.0 + 1.5 ** 0.5)
    assert phi(1.5, CAUCHY) == pytest.approx(expected, rel=1e-12)


def test_xi_and_sigma_branches():
    high = ModelParams(2, 1.0)
    low = ModelParams(1, 0.5)
    assert xi(0.5, high) == pytest.approx(0.25)
    assert xi(0.5, low) == pytest.approx(0.5 ** 1.5)
    assert xi(0.5, CAUCHY) == pytest.approx(0.25 * math.log(2.0))
    assert sigma(0.5, high) == pytest.approx(0.5 ** -1.0)
    assert sigma(0.5, low) == 1.0
    assert sigma(0.5, CAUCHY) == pytest.approx(math.log(2.0))


def test_xi_and_sigma_domains():
    with pytest.raises(ParameterDomainError):
        xi(0.0, CAUCHY)
    with pytest.raises(ParameterDomainError):
        xi(1.0, CAUCHY)
    with pytest.raises(ParameterDomainError):
        sigma(0.0, CAUCHY)
    with pytest.raises(ParameterDomainError):
        sigma(1.5, ModelParams(2, 1.0))


def test_stable_constant_reduces_to_cauchy():
    assert stable_constant(CAUCHY) == pytest.approx(1.0 / math.pi, rel=1e-12)


def test_sphere_area():
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(2) == pytest.approx(2.0 * math.pi)
    assert sphere_area(3) == pytest.approx(4.0 * math.pi)


@pytest.mark.parametrize("d,alpha", [(1, 0.5), (1, 1.0), (2, 1.0), (3, 1.5)])
def test_removed_profile_is_controlled_by_xi(d, alpha):
    bound = xi_bound_constant(ModelParams(d, alpha), r_grid=np.geomspace(1e-3, 0.5, 30))
    assert math.isfinite(bound)
    assert 0.0 < bound < 10.0


def test_tail_bound_constant_is_finite():
    c1 = tail_bound_constant(ModelParams(2, 1.0), r_grid=np.linspace(1.0, 30.0, 20))
    assert 1.0 <= c1 < 10.0


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
