#!/usr/bin/env python3
"""
Tests for the jump densities and the removed-mass identity
"""
import math

import numpy as np
import pytest
from scipy import special

from relkernel.config import ModelParams
from relkernel.errors import ParameterDomainError
from relkernel.levy_layer import (deleted_jump_rate, doubling_constant, jump_rate_above, levy_density,
                                  levy_density_array, removed_density, removed_mass, shift_constant,
                                  stable_jump_rate, sub_cut_deletion_mass, thinning_probability)

MASSIVE = ModelParams(d=1, alpha=1.0, m=1.0)


def test_levy_density_values():
    assert levy_density(1.0, ModelParams(1, 1.0)) == pytest.approx(1.0 / math.pi, rel=1e-12)
    assert levy_density(1.0, MASSIVE) == pytest.approx(special.k1(1.0) / math.pi, rel=1e-7)
    assert levy_density(1.0, MASSIVE) == pytest.approx(0.19159, abs=1e-5)


def test_removed_density_values():
    assert removed_density(1.0, MASSIVE) == pytest.approx((1.0 - special.k1(1.0)) / math.pi, rel=1e-7)
    assert removed_density(0.3, ModelParams(2, 1.5, 0.0)) == 0.0


def test_densities_split_the_stable_density():
    params = ModelParams(2, 1.5, 0.8)
    stable = ModelParams(2, 1.5, 0.0)
    for r in (0.05, 0.7, 3.0):
        total = levy_density(r, params) + removed_density(r, params)
        assert total == pytest.approx(levy_density(r, stable), rel=1e-9)


def test_array_form_agrees():
    params = ModelParams(3, 0.5, 2.0)
    radii = np.array([0.01, 0.2, 1.0, 5.0])
    expected = [levy_density(r, params) for r in radii]
    assert np.allclose(levy_density_array(radii, params), expected, rtol=1e-8)


def test_density_is_singular_at_zero():
    with pytest.raises(ParameterDomainError):
        levy_density(0.0, MASSIVE)
    with pytest.raises(ParameterDomainError):
        removed_density(0.0, MASSIVE)
    with pytest.raises(ParameterDomainError):
        levy_density_array([1.0, 0.0], MASSIVE)


def test_density_increases_to_the_stable_one_as_mass_vanishes():
    r = 0.8
    values = [levy_density(r, ModelParams(1, 1.5, m)) for m in (1.0, 0.5, 0.1, 0.01)]
    assert all(a < b for a, b in zip(values, values[1:]))
    assert values[-1] < levy_density(r, ModelParams(1, 1.5, 0.0))


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
@pytest.mark.parametrize("m", [0.1, 1.0])
def test_removed_mass_equals_m(d, alpha, m):
    assert removed_mass(ModelParams(d, alpha, m)) == pytest.approx(m, rel=1e-6)


def test_removed_mass_examples():
    assert removed_mass(ModelParams(1, 1.0, 0.7)) == pytest.approx(0.7, rel=1e-6)
    assert removed_mass(ModelParams(2, 1.5, 1.0)) == pytest.approx(1.0, rel=1e-6)
    assert removed_mass(ModelParams(2, 1.5, 0.0)) == 0.0


def test_thinning_probability():
    assert thinning_probability(3.0, ModelParams(1, 1.0)) == 1.0
    assert thinning_probability(1.0, MASSIVE) == pytest.approx(0.60191, abs=1e-5)
    sizes = np.geomspace(0.01, 10.0, 30)
    keep = thinning_probability(sizes, MASSIVE)
    assert np.all(np.diff(keep) <= 0.0)
    assert np.all((keep > 0.0) & (keep <= 1.0))


def test_jump_rates_are_consistent():
    cut = 0.5
    assert stable_jump_rate(1.0, ModelParams(1, 1.0)) == pytest.approx(2.0 / math.pi)
    assert jump_rate_above(cut, MASSIVE) + deleted_jump_rate(cut, MASSIVE) == pytest.approx(
        stable_jump_rate(cut, MASSIVE), rel=1e-12)
    assert sub_cut_deletion_mass(cut, MASSIVE) + deleted_jump_rate(cut, MASSIVE) == pytest.approx(1.0, rel=1e-6)
    assert 0.0 < jump_rate_above(cut, MASSIVE) < stable_jump_rate(cut, MASSIVE)


def test_doubling_and_shift_constants_are_finite():
    params = ModelParams(2, 1.0, 1.0)
    c10 = doubling_constant(params, r_grid=np.geomspace(1e-2, 0.99, 12))
    c11 = shift_constant(params, r_grid=np.geomspace(1.01, 20.0, 12))
    # at m = 0 the doubling ratio is exactly 2^{d + alpha}
    assert 2.0 ** 3 <= c10 < 2.0 ** 3 * 3.0
    assert 1.0 < c11 < 100.0


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
