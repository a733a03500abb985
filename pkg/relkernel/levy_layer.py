"""
Levy Layer - jump densities J, J^m, the removed part J_m and their integrals

Every density is radial, so the functions take the separation r = |x - y|.
Integrals over R^d use the radial reduction with the unit-sphere area.
"""
import math
from functools import lru_cache

import numpy as np

from relkernel.config import DEFAULT_QUAD, ModelParams, QuadratureConfig
from relkernel.errors import ParameterDomainError
from relkernel.logging_config import get_logger
from relkernel.special_layer import (adaptive_quad, one_minus_psi, psi, psi_closed_form,
                                     sphere_area, stable_constant)

logger = get_logger(__name__)

# beyond this dimensionless radius psi is below 1e-15 and 1 - psi is 1 to double precision
_PSI_NEGLIGIBLE = 40.0
_OUTER_QUAD = QuadratureConfig(rel_tol=1e-9, abs_tol=0.0, max_subdivisions=200)


def _check_positive(r):
    r = float(r)
    if not r > 0.0:
        raise ParameterDomainError(f"the jump density is singular at r = 0, got r={r!r}")
    return r


def levy_density(r, params, quad=DEFAULT_QUAD):
    """j^m(r) = A(d, -alpha) r^{-d-alpha} psi(m^{1/alpha} r)"""
    r = _check_positive(r)
    base = stable_constant(params) * r ** (-params.d - params.alpha)
    if params.m == 0.0:
        return base
    return base * psi(params.m_root * r, params, quad)


def levy_density_array(r, params):
    """Vectorised j^m using the Bessel form of psi; r > 0 elementwise"""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise ParameterDomainError("the jump density is singular at r = 0")
    base = stable_constant(params) * r ** (-params.d - params.alpha)
    if params.m == 0.0:
        return base
    return base * psi_closed_form(params.m_root * r, params)


def removed_density(r, params, quad=DEFAULT_QUAD):
    """j_m(r) = A(d, -alpha) r^{-d-alpha} (1 - psi(m^{1/alpha} r)); zero when m = 0"""
    r = _check_positive(r)
    if params.m == 0.0:
        return 0.0
    return stable_constant(params) * r ** (-params.d - params.alpha) \
        * one_minus_psi(params.m_root * r, params, quad)


def thinning_probability(jump_size, params):
    """Retention probability J^m / J = psi(m^{1/alpha} rho) of a stable jump of size rho"""
    if params.m == 0.0:
        return np.ones_like(np.asarray(jump_size, dtype=float)) if np.ndim(jump_size) else 1.0
    return psi_closed_form(params.m_root * np.asarray(jump_size, dtype=float), params)


def _lower_log_limit(params):
    """Left end of the log-radius panel; the profile decays like u^{e} near 0"""
    if params.d + params.alpha > 2.0:
        exponent = 2.0 - params.alpha
    else:
        exponent = 1.0
    return max(-700.0, math.log(1e-13) / exponent)


@lru_cache(maxsize=256)
def _removed_profile(d, alpha, u_lower, rel_tol, max_subdivisions):
    """
    int_{u_lower}^inf u^{-1-alpha} (1 - psi(u)) du, integrated in w = ln u.
    u_lower = 0 gives the full profile.
    """
    params = ModelParams(d=d, alpha=alpha, m=1.0)
    inner = QuadratureConfig(rel_tol=rel_tol, abs_tol=0.0, max_subdivisions=max_subdivisions)

    def integrand(w):
        u = math.exp(w)
        return math.exp(-alpha * w) * one_minus_psi(u, params, inner)

    w_lo = _lower_log_limit(params) if u_lower == 0.0 else math.log(u_lower)
    w_cut = math.log(_PSI_NEGLIGIBLE)
    total = 0.0
    if w_lo < w_cut:
        edges = sorted({w_lo, min(max(0.0, w_lo), w_cut), w_cut})
        for lo, hi in zip(edges[:-1], edges[1:]):
            if hi > lo:
                total += adaptive_quad(integrand, lo, hi, _OUTER_QUAD, epsabs=0.0)[0]
        total += _PSI_NEGLIGIBLE ** (-alpha) / alpha
    else:
        total += u_lower ** (-alpha) / alpha
    logger.debug("removed profile d=%d alpha=%g from u=%g: %.12g", d, alpha, u_lower, total)
    return total


def removed_mass(params, quad=DEFAULT_QUAD):
    """int_{R^d} J_m(x, y) dy; equals m"""
    if params.m == 0.0:
        return 0.0
    profile = _removed_profile(params.d, params.alpha, 0.0, quad.rel_tol, int(quad.max_subdivisions))
    return params.m * sphere_area(params.d) * stable_constant(params) * profile


def deleted_jump_rate(jump_cut, params, quad=DEFAULT_QUAD):
    """Rate of removed jumps larger than jump_cut: int_{|z| > cut} J_m(z) dz"""
    jump_cut = _check_positive(jump_cut)
    if params.m == 0.0:
        return 0.0
    profile = _removed_profile(params.d, params.alpha, params.m_root * jump_cut,
                               quad.rel_tol, int(quad.max_subdivisions))
    return params.m * sphere_area(params.d) * stable_constant(params) * profile


def sub_cut_deletion_mass(jump_cut, params, quad=DEFAULT_QUAD):
    """int_{|z| <= cut} J_m(z) dz, the removed intensity a thinning sampler ignores"""
    return max(0.0, removed_mass(params, quad) - deleted_jump_rate(jump_cut, params, quad))


def stable_jump_rate(jump_cut, params):
    """int_{|z| > cut} J(z) dz = |S^{d-1}| A cut^{-alpha} / alpha for the untempered density"""
    jump_cut = _check_positive(jump_cut)
    return sphere_area(params.d) * stable_constant(params) * jump_cut ** (-params.alpha) / params.alpha


def jump_rate_above(jump_cut, params, quad=DEFAULT_QUAD):
    """int_{|z| > cut} J^m(z) dz by radial quadrature"""
    if params.m == 0.0:
        return stable_jump_rate(jump_cut, params)
    return stable_jump_rate(jump_cut, params) - deleted_jump_rate(jump_cut, params, quad)


def doubling_constant(params, r_grid=None, quad=DEFAULT_QUAD):
    """max of j^m(r) / j^m(2r) over r in (0, 1); the empirical C10"""
    if r_grid is None:
        r_grid = np.geomspace(1e-3, 0.999, 60)
    return float(max(levy_density(r, params, quad) / levy_density(2.0 * r, params, quad) for r in r_grid))


def shift_constant(params, a=1.0, r_grid=None, quad=DEFAULT_QUAD):
    """max of j^m(r) / j^m(r + a) over r > a; the empirical C11"""
    if r_grid is None:
        r_grid = np.geomspace(a * 1.001, 30.0 * a, 60)
    return float(max(levy_density(r, params, quad) / levy_density(r + a, params, quad) for r in r_grid))
