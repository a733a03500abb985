"""
Analytics Layer - Breakdowns of sweep reports and empirical constants
"""
import math

import numpy as np
import pandas as pd

from relkernel.config import DEFAULT_QUAD, MCConfig
from relkernel.domain_layer import Ball
from relkernel.errors import ParameterDomainError
from relkernel.estimator_layer import MonteCarloEstimator
from relkernel.kernel_layer import free_kernel, theta_bound_constant
from relkernel.levy_layer import doubling_constant, levy_density, shift_constant
from relkernel.logging_config import get_logger
from relkernel.simulation_layer import RngStream
from relkernel.special_layer import tail_bound_constant, xi_bound_constant
from relkernel.verification_layer import fit_band, per_mass_bands

logger = get_logger(__name__)

_HARNACK_STREAM = 1 << 21


class RatioAnalytics:
    """Summaries of the records of one RatioReport"""

    def __init__(self, report):
        self.report = report

    def frame(self):
        rows = [{
            'm': rec.m,
            't': rec.t,
            'stratum': rec.stratum,
            'distance': rec.distance,
            'delta': min(rec.delta_x, rec.delta_y),
            'ratio': rec.ratio,
            'rel_se': rec.rel_se,
        } for rec in self.report.records]
        df = pd.DataFrame(rows, columns=['m', 't', 'stratum', 'distance', 'delta', 'ratio', 'rel_se'])
        df['log_ratio'] = np.log(df['ratio'].astype(float))
        return df

    def get_stratum_breakdown(self):
        """Count, ratio range and band per stratum"""
        df = self.frame()
        if df.empty:
            return {}
        breakdown = {}
        for stratum, group in df.groupby('stratum', sort=True):
            breakdown[stratum] = {
                'count': int(len(group)),
                'min_ratio': float(group['ratio'].min()),
                'max_ratio': float(group['ratio'].max()),
                'geo_mean': float(np.exp(group['log_ratio'].mean())),
                'C': float(np.exp(group['log_ratio'].abs().max())),
            }
        return breakdown

    def get_mass_breakdown(self):
        return {repr(m): c for m, c in per_mass_bands(self.report.records).items()}

    def get_uniformity_check(self):
        """Joint band over all masses against twice the largest per-mass band"""
        if not self.report.records:
            return {'joint_C': None, 'max_per_mass_C': None, 'uniform': False}
        joint, _ = fit_band(self.report.records)
        per_mass = per_mass_bands(self.report.records)
        largest = max(per_mass.values())
        return {'joint_C': joint, 'max_per_mass_C': largest, 'uniform': joint <= 2.0 * largest}

    def get_retention(self):
        kept = len(self.report.records)
        total = kept + int(self.report.dropped_points)
        return {
            'retained': kept,
            'dropped': int(self.report.dropped_points),
            'retained_fraction': kept / total if total else 0.0,
        }


def free_kernel_upper_constants(params, t_grid=(0.1, 0.5, 1.0), quad=DEFAULT_QUAD):
    """
    L = max p / (t e^{mt} J^m) over r >= t^{1/alpha}, and
    M2 = max p(t, 0) / (m^{d/alpha - d/2} t^{-d/2} + t^{-d/alpha}).
    """
    d, alpha, m = params.d, params.alpha, params.m
    big_l, m2 = 0.0, 0.0
    for t in t_grid:
        scale = t ** (1.0 / alpha)
        for factor in (1.0, 2.0, 4.0, 8.0):
            r = factor * scale
            x = np.zeros(d)
            x[0] = r
            bound = t * math.exp(m * t) * levy_density(r, params, quad)
            big_l = max(big_l, free_kernel(t, x, params, quad) / bound)
        mass_term = m ** (d / alpha - d / 2.0) * t ** (-d / 2.0) if m > 0 else 0.0
        m2 = max(m2, free_kernel(t, np.zeros(d), params, quad) / (mass_term + t ** (-d / alpha)))
    return big_l, m2


def empirical_constants(params, quad=DEFAULT_QUAD):
    """Grid estimates of the constants the two-sided bounds leave unquantified"""
    big_l, m2 = free_kernel_upper_constants(params, quad=quad)
    constants = {
        'params': params.to_dict(),
        'c1': tail_bound_constant(params, quad=quad),
        'C9': xi_bound_constant(params, quad=quad),
        'C10': doubling_constant(params, quad=quad),
        'C11': shift_constant(params, quad=quad),
        'L': big_l,
        'M2': m2,
        'theta_bound': theta_bound_constant(params.alpha, quad=quad),
    }
    logger.debug("empirical constants %s", constants)
    return constants


def meyer_ratio(dom, params, times, pairs, mc=None):
    """
    p^m_D / p_D on a bounded domain with coupled seeds (both estimators share mc).

    Returns the table of estimates and the range of the ratio.
    """
    mc = mc or MCConfig()
    massive = MonteCarloEstimator(params, mc)
    massless = MonteCarloEstimator(params.with_mass(0.0), mc)
    rows = []
    for t in times:
        for x, y in pairs:
            p_m = massive.killed_kernel(dom, t, x, y)
            p_0 = massless.killed_kernel(dom, t, x, y)
            rows.append({
                't': float(t),
                'x': tuple(np.ravel(x).tolist()),
                'y': tuple(np.ravel(y).tolist()),
                'p_m': p_m.value,
                'p_0': p_0.value,
                'ratio': p_m.value / p_0.value if p_0.value > 0 else math.nan,
            })
    table = pd.DataFrame(rows, columns=['t', 'x', 'y', 'p_m', 'p_0', 'ratio'])
    ratios = table['ratio'].dropna()
    return {
        'table': table,
        'min_ratio': float(ratios.min()) if len(ratios) else None,
        'max_ratio': float(ratios.max()) if len(ratios) else None,
    }


def harnack_ratio(dom, params, x, center, radius, t=None, n_points=8, mc=None):
    """
    sup / inf over n_points of B(center, radius) of p^m_D(t, x, .) when t is
    given, of G^m_D(x, .) otherwise. The ball must lie inside dom, away from x.
    """
    mc = mc or MCConfig()
    ball = Ball(d=params.d, center=center, radius=radius)
    ys = ball.sample_interior(RngStream(mc.seed, _HARNACK_STREAM).generator(), n_points)
    if not np.all(dom.contains(ys)):
        raise ParameterDomainError(f"{ball.describe()} is not inside {dom.describe()}")
    estimator = MonteCarloEstimator(params, mc)
    if t is None:
        values = np.array([estimator.green(dom, x, y).value for y in ys])
    else:
        steps = int(mc.grid_steps)
        mean, _, _ = estimator.kernel_curve(dom, x, ys, float(t) / steps, steps)
        values = mean[-1]
    ratio = float(values.max() / values.min()) if values.min() > 0 else math.inf
    return {'ratio': ratio, 'values': values, 'points': ys}
