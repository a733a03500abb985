#!/usr/bin/env python3
"""
Tests for the closed-form heat kernel and Green function comparators
"""
import math

import numpy as np
import pytest

from relkernel.bounds_layer import (four_point_supremum, g_halfspace_d1, g_halfspace_d_ge_2, q_large_time,
                                    q_small_time, three_g_supremum, v_alpha, v_tilde, vtilde_branch_jump)
from relkernel.config import ModelParams
from relkernel.domain_layer import Ball, HalfSpace, IntervalUnion
from relkernel.errors import ParameterDomainError

INTERVAL = IntervalUnion(d=1, intervals=((0.0, 2.0),))
MASSIVE = ModelParams(d=1, alpha=1.0, m=1.0)


def test_small_time_comparator_example():
    expected = 0.25 * math.exp(-1.5) * (1.0 + 1.5 ** 0.5) / 1.5 ** 2
    value = q_small_time(0.25, [0.25], [1.75], INTERVAL, MASSIVE)
    assert value == pytest.approx(expected, rel=1e-10)
    assert value == pytest.approx(0.05516, abs=1e-5)


def test_small_time_comparator_on_the_diagonal():
    assert q_small_time(1.0, [1.0], [1.0], INTERVAL, MASSIVE) == pytest.approx(1.0, rel=1e-12)


def test_small_time_comparator_boundary_decay():
    r = 0.99
    interior = min(1.0 / 0.25, 0.25 * math.exp(-r) * (1.0 + math.sqrt(r)) / r ** 2)
    value = q_small_time(0.25, [0.01], [1.0], INTERVAL, MASSIVE)
    assert value == pytest.approx(math.sqrt(0.01) / 0.5 * interior, rel=1e-10)


def test_small_time_comparator_is_symmetric():
    dom = Ball(d=2, radius=1.0)
    params = ModelParams(2, 1.5, 0.5)
    x, y = [0.1, 0.3], [-0.6, 0.2]
    assert q_small_time(0.2, x, y, dom, params) == pytest.approx(q_small_time(0.2, y, x, dom, params), rel=1e-14)


def test_large_time_comparator_examples():
    assert q_large_time(1.0, [1.0], [0.5], INTERVAL, MASSIVE, 2.0) == pytest.approx(
        math.exp(-2.0) * math.sqrt(0.5), rel=1e-10)
    assert q_large_time(1.0, [1.0], [0.5], INTERVAL, MASSIVE, 2.0) == pytest.approx(0.09569, abs=1e-5)
    assert q_large_time(0.0, [1.0], [1.0], INTERVAL, MASSIVE, 2.0) == 1.0


def test_large_time_comparator_needs_a_bounded_domain():
    with pytest.raises(ParameterDomainError):
        q_large_time(1.0, [1.0], [2.0], HalfSpace(d=1), MASSIVE, 1.0)
    with pytest.raises(ParameterDomainError):
        q_large_time(1.0, [1.0], [0.5], INTERVAL, MASSIVE, 0.0)


def test_points_must_lie_in_the_domain():
    with pytest.raises(ParameterDomainError):
        q_small_time(0.5, [2.5], [1.0], INTERVAL, MASSIVE)
    with pytest.raises(ParameterDomainError):
        q_small_time(0.0, [0.5], [1.0], INTERVAL, MASSIVE)


def test_v_alpha_examples():
    ball = Ball(d=2, radius=1.0)
    assert v_alpha([0.0, 0.0], [0.5, 0.0], ball, ModelParams(2, 1.0)) == pytest.approx(2.0, rel=1e-10)
    assert v_alpha([0.5], [1.5], INTERVAL, ModelParams(1, 1.0)) == pytest.approx(math.log(1.5), rel=1e-10)
    assert v_alpha([0.5], [1.5], INTERVAL, ModelParams(1, 1.5)) == pytest.approx(0.25 ** 0.75, rel=1e-10)
    assert v_alpha([0.5], [1.5], INTERVAL, ModelParams(1, 1.5)) == pytest.approx(0.35355, abs=1e-5)


def test_v_alpha_is_singular_on_the_diagonal():
    with pytest.raises(ParameterDomainError):
        v_alpha([1.0], [1.0], INTERVAL, MASSIVE)


def test_v_tilde_examples():
    half = HalfSpace(d=3)
    params = ModelParams(3, 1.0, 1.0)
    assert v_tilde([0.0, 0.0, 1.0], [0.0, 0.0, 2.0], half, params) == pytest.approx(1.0, rel=1e-10)
    assert v_tilde([0.0, 0.0, 1.0], [4.0, 0.0, 1.0], half, params) == pytest.approx(0.0625, rel=1e-10)


def test_v_tilde_needs_mass():
    with pytest.raises(ParameterDomainError):
        v_tilde([0.0, 1.0], [0.0, 2.0], HalfSpace(d=2), ModelParams(2, 1.0, 0.0))


@pytest.mark.parametrize("d,alpha", [(1, 0.5), (1, 1.0), (1, 1.5), (2, 1.0), (3, 1.5)])
def test_v_tilde_is_positive_and_symmetric(d, alpha):
    params = ModelParams(d, alpha, 1.0)
    half = HalfSpace(d=d)
    rng = np.random.default_rng(d * 10 + int(alpha * 2))
    for _ in range(20):
        x = rng.uniform(-3.0, 3.0, d)
        y = rng.uniform(-3.0, 3.0, d)
        x[-1], y[-1] = abs(x[-1]) + 0.01, abs(y[-1]) + 0.01
        a, b = v_tilde(x, y, half, params), v_tilde(y, x, half, params)
        assert a > 0.0 and math.isfinite(a)
        assert a == pytest.approx(b, rel=1e-12)


def test_branch_jump_is_finite():
    for d, alpha in [(1, 0.5), (1, 1.0), (2, 1.5), (3, 1.0)]:
        jump = vtilde_branch_jump(0.5, 1.0, ModelParams(d, alpha, 1.0))
        assert 0.0 < jump < math.inf


def test_half_space_comparators():
    params = ModelParams(2, 1.0, 1.0)
    assert g_halfspace_d_ge_2([0.0, 1.0], [0.0, 2.0], params) == pytest.approx(1.0 + math.log(2.0), rel=1e-10)
    expected = math.exp(-2.0) / math.sqrt(2.0) + 2.0
    assert g_halfspace_d1(1.0, 3.0, MASSIVE) == pytest.approx(expected, rel=1e-10)
    assert g_halfspace_d1(1.0, 3.0, MASSIVE) == pytest.approx(2.09570, abs=1e-5)
    assert g_halfspace_d1(3.0, 1.0, MASSIVE) == g_halfspace_d1(1.0, 3.0, MASSIVE)


def test_half_space_comparator_errors():
    with pytest.raises(ParameterDomainError):
        g_halfspace_d1(-1.0, 1.0, MASSIVE)
    with pytest.raises(ParameterDomainError):
        g_halfspace_d_ge_2([0.0], [1.0], MASSIVE)
    with pytest.raises(ParameterDomainError):
        g_halfspace_d1(1.0, 1.0, ModelParams(1, 0.5, 1.0))


def test_half_line_comparator_on_the_diagonal():
    with pytest.raises(ParameterDomainError):
        g_halfspace_d1(1.0, 1.0, MASSIVE)
    # alpha > 1 stays bounded at x = y
    assert math.isfinite(g_halfspace_d1(1.0, 1.0, ModelParams(1, 1.5, 1.0)))


@pytest.mark.parametrize("alpha", [1.0, 1.5])
def test_three_g_suprema_are_finite(alpha):
    params = ModelParams(1, alpha)
    sup3 = three_g_supremum(params, n_triples=2000, seed=1)
    sup4 = four_point_supremum(params, n_samples=2000, seed=1)
    assert 0.0 < sup3 < math.inf
    assert 0.0 < sup4 < math.inf


def test_three_g_checks_are_one_dimensional():
    with pytest.raises(ParameterDomainError):
        three_g_supremum(ModelParams(2, 1.0), n_triples=10)
    with pytest.raises(ParameterDomainError):
        four_point_supremum(ModelParams(1, 0.5), n_samples=10)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
