#!/usr/bin/env python3
"""
Tests for ratio sweeps, band fitting and the exit-time check
"""
import math

import numpy as np
import pytest

from relkernel.config import MCConfig, ModelParams
from relkernel.domain_layer import Ball, FullSpace, HalfSpace, IntervalUnion
from relkernel.errors import ConfigError, EmptySweepError, IncompatibleSweepError
from relkernel.verification_layer import (ExitCheckConfig, RatioRecord, SweepConfig, classify_pair, fit_band,
                                          per_mass_bands, run_exit_time_check, run_sweep, stratified_pairs)

INTERVAL = IntervalUnion(d=1, intervals=((0.0, 2.0),))
TINY_MC = MCConfig(n_samples=200, grid_steps=4, seed=9, n_streams=4, workers=1)


def records_with_ratios(ratios, m=1.0):
    params = ModelParams(1, 1.0, m)
    return [RatioRecord.build(params, 1.0, [0.0], [1.0], 1.0, r, 0.0) for r in ratios]


def test_fit_band_examples():
    assert fit_band(records_with_ratios([2.0, 0.5]))[0] == pytest.approx(2.0)
    assert fit_band(records_with_ratios([1.0 / math.pi, 1.0, math.pi]))[0] == pytest.approx(math.pi)
    assert fit_band(records_with_ratios([1.0]))[0] == 1.0


def test_fit_band_keeps_the_default_on_ties():
    records = records_with_ratios([1.5, 0.8])
    C, c2 = fit_band(records, recompute=lambda rec, c2: rec.comparator, c2_grid=(0.5, 1.0, 2.0), c2_default=1.0)
    assert c2 == 1.0
    assert C == pytest.approx(1.5)


def test_fit_band_picks_the_best_inner_constant():
    records = records_with_ratios([4.0])
    C, c2 = fit_band(records, recompute=lambda rec, c2: c2, c2_grid=(1.0, 2.0, 4.0))
    assert c2 == 4.0
    assert C == pytest.approx(1.0)


def test_fit_band_on_nothing():
    with pytest.raises(EmptySweepError):
        fit_band([])


def test_per_mass_bands():
    records = records_with_ratios([2.0, 0.5], m=0.1) + records_with_ratios([3.0], m=1.0)
    assert per_mass_bands(records) == {0.1: pytest.approx(2.0), 1.0: pytest.approx(3.0)}


def test_classify_pair():
    assert classify_pair(0.01, 0.02, 1.0) == 'both-near'
    assert classify_pair(0.01, 2.0, 1.0) == 'one-near'
    assert classify_pair(1.0, 2.0, 1.0) == 'interior'
    assert classify_pair(0.5, 2.0, 1.0) == 'mixed'


def test_stratified_pairs_cover_the_strata():
    rng = np.random.default_rng(0)
    pairs = stratified_pairs(INTERVAL, 0.2, 9, rng)
    assert len(pairs) == 9
    assert [s for _, _, s in pairs] == ['interior'] * 3 + ['one-near'] * 3 + ['both-near'] * 3
    for x, y, stratum in pairs:
        assert INTERVAL.contains(x) and INTERVAL.contains(y)
        assert classify_pair(INTERVAL.dist_to_complement(x), INTERVAL.dist_to_complement(y), 0.2) == stratum


def test_full_space_pairs_are_radial():
    pairs = stratified_pairs(FullSpace(d=2), 1.0, 5, np.random.default_rng(0))
    assert len(pairs) == 5
    assert np.array_equal(pairs[0][1], [0.0, 0.0])
    assert all(s == 'radial' for _, _, s in pairs)


def test_self_test_sweep_passes_with_unit_ratios():
    config = SweepConfig(theorem_tag='thm11_small_time', domain=INTERVAL, d=1, alpha=1.0, m_grid=(0.1, 1.0),
                         t_grid=(0.05, 0.2), n_pairs=6, mc=TINY_MC, self_test=True)
    report = run_sweep(config)
    assert report.passed
    assert len(report.records) == 24
    assert all(rec.ratio == 1.0 for rec in report.records)
    assert report.summary['fitted']['C'] == 1.0
    assert report.summary['fitted']['c2_inner'] == 1.0
    assert report.dropped_points == 0


def test_free_kernel_sweep_reports_the_cauchy_ratio():
    config = SweepConfig(theorem_tag='free_kernel', domain=FullSpace(d=1), d=1, alpha=1.0, m_grid=(0.0,),
                         t_grid=(1.0,), pairs=(((0.0,), (0.0,)),), mc=TINY_MC)
    report = run_sweep(config)
    assert len(report.records) == 1
    assert report.records[0].ratio == pytest.approx(1.0 / math.pi, rel=1e-6)
    assert report.summary['fitted']['C'] == pytest.approx(math.pi, rel=1e-6)
    assert report.passed


def test_cap_decides_the_verdict():
    config = SweepConfig(theorem_tag='free_kernel', domain=FullSpace(d=1), d=1, alpha=1.0, m_grid=(0.0,),
                         t_grid=(1.0,), pairs=(((0.0,), (0.0,)),), mc=TINY_MC, cap=2.0)
    report = run_sweep(config)
    assert report.verdict == 'fail'
    assert 'exceeds the cap' in report.reason


def test_incompatible_domains_are_rejected():
    with pytest.raises(IncompatibleSweepError):
        run_sweep(SweepConfig(theorem_tag='v_alpha', domain=HalfSpace(d=1), d=1, alpha=1.0, mc=TINY_MC))
    with pytest.raises(IncompatibleSweepError):
        run_sweep(SweepConfig(theorem_tag='vtilde', domain=HalfSpace(d=2), d=2, alpha=1.0, m_grid=(0.0, 1.0),
                              mc=TINY_MC))
    with pytest.raises(IncompatibleSweepError):
        run_sweep(SweepConfig(theorem_tag='halfspace_d1', domain=HalfSpace(d=1, a=1.0), d=1, alpha=1.0,
                              mc=TINY_MC))


def test_sweep_config_validation():
    with pytest.raises(ConfigError):
        SweepConfig(theorem_tag='thm99', domain=INTERVAL, d=1, alpha=1.0)
    with pytest.raises(ConfigError):
        SweepConfig(theorem_tag='thm11_small_time', domain=INTERVAL, d=1, alpha=1.0)
    with pytest.raises(ConfigError):
        SweepConfig(theorem_tag='v_alpha', domain=INTERVAL, d=1, alpha=1.0, m_grid=(2.0,))
    with pytest.raises(ConfigError):
        SweepConfig(theorem_tag='v_alpha', domain=Ball(d=2), d=1, alpha=1.0)


def test_sweeps_are_deterministic():
    config = SweepConfig(theorem_tag='thm11_small_time', domain=INTERVAL, d=1, alpha=1.0, m_grid=(1.0,),
                         t_grid=(0.2,), n_pairs=3, mc=TINY_MC, max_rel_se=1e9)
    first, second = run_sweep(config), run_sweep(config)
    assert [(r.x, r.y, r.estimate, r.ratio) for r in first.records] == \
        [(r.x, r.y, r.estimate, r.ratio) for r in second.records]
    assert first.summary == second.summary


def test_strict_filter_empties_the_sweep():
    config = SweepConfig(theorem_tag='thm11_small_time', domain=INTERVAL, d=1, alpha=1.0, m_grid=(1.0,),
                         t_grid=(0.2,), n_pairs=3, mc=TINY_MC, max_rel_se=1e-12)
    with pytest.raises(EmptySweepError) as info:
        run_sweep(config)
    assert info.value.dropped == 3


def test_exit_check_with_a_loose_target_takes_the_ceiling():
    mc = MCConfig(n_samples=400, grid_steps=64, seed=4, n_streams=4, workers=1)
    config = ExitCheckConfig(d=1, alpha=1.0, m_grid=(0.5,), r_grid=(0.5, 1.0), target=0.999, mc=mc)
    report = run_exit_time_check(config)
    assert report.passed
    assert report.summary['fitted']['gamma'] == 0.5
    assert [rec.stratum for rec in report.records] == ['r=0.5', 'r=1']
    assert all(rec.estimate <= 0.999 for rec in report.records)


def test_exit_probability_is_scale_invariant_without_mass():
    mc = MCConfig(n_samples=400, grid_steps=64, seed=6, n_streams=4, workers=1)
    config = ExitCheckConfig(d=1, alpha=1.0, m_grid=(0.0,), r_grid=(0.25, 1.0), target=0.25, mc=mc)
    report = run_exit_time_check(config)
    small, large = report.records
    assert abs(small.estimate - large.estimate) <= 3.0 * math.hypot(small.std_err, large.std_err) + 1e-12


def test_exit_check_config_validation():
    with pytest.raises(ConfigError):
        ExitCheckConfig(d=1, alpha=1.0, r_grid=(2.0,))
    with pytest.raises(ConfigError):
        ExitCheckConfig(d=1, alpha=1.0, target=1.5)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
