"""
Special Function Layer - psi, phi, xi, sigma and the constant A(d, -alpha)

psi is evaluated by adaptive Gauss-Kronrod quadrature (QUADPACK through
scipy) split at the peak of the integrand, with the semi-infinite tail
handled by the QAGI transform. A vectorised Bessel closed form is kept next
to it for the samplers and as a cross-check.
"""
import math

import numpy as np
from scipy import integrate, special

from relkernel.config import DEFAULT_QUAD
from relkernel.errors import ParameterDomainError, QuadratureError
from relkernel.logging_config import get_logger

logger = get_logger(__name__)

_FATAL_IER = (1, 5)


def adaptive_quad(func, a, b, quad=DEFAULT_QUAD, epsabs=None, points=None):
    """scipy quad with the package tolerances; raises QuadratureError on failure"""
    if epsabs is None:
        epsabs = quad.abs_tol
    kwargs = {'epsabs': epsabs, 'epsrel': quad.rel_tol, 'limit': int(quad.max_subdivisions), 'full_output': 1}
    if points is not None and np.isfinite(a) and np.isfinite(b):
        kwargs['points'] = [p for p in points if a < p < b]
    out = integrate.quad(func, a, b, **kwargs)
    value, abs_error = out[0], out[1]
    if len(out) > 3:
        ier = out[2].get('ier', 0) if isinstance(out[2], dict) else 0
        message = out[3]
        # ier is not part of infodict on every scipy version; fall back to the message
        failed = ier in _FATAL_IER or 'maximum number of subdivisions' in str(message) \
            or 'divergent' in str(message)
        loose = abs_error > max(epsabs, 1e-6 * abs(value))
        if failed or loose or not np.isfinite(value):
            raise QuadratureError(f"quadrature on [{a}, {b}] did not converge: {message}",
                                  partial=value, abs_error=abs_error)
        logger.debug("quad [%g, %g]: %s (err %.2e)", a, b, message, abs_error)
    return value, abs_error


def _check_nonneg(r, name='r'):
    if not np.all(np.asarray(r) >= 0):
        raise ParameterDomainError(f"{name} must be >= 0, got {r!r}")


def _half_index(params):
    """k = (d + alpha)/2"""
    return 0.5 * (params.d + params.alpha)


def psi(r, params, quad=DEFAULT_QUAD):
    """
    psi(r) = 2^{-(d+alpha)} Gamma((d+alpha)/2)^{-1}
             int_0^inf s^{(d+alpha)/2 - 1} exp(-s/4 - r^2/s) ds

    The integrand is multiplied by e^{r} so the quadrature works on an O(1)
    quantity; the peak sits at s = 2r for large r.
    """
    _check_nonneg(r)
    r = float(r)
    if r == 0.0:
        return 1.0
    k = _half_index(params)
    log_norm = -(params.d + params.alpha) * math.log(2.0) - special.gammaln(k)

    def integrand(s):
        if s <= 0.0:
            return 0.0
        return math.exp((k - 1.0) * math.log(s) - 0.25 * s - r * r / s + r + log_norm)

    split = max(4.0, 2.0 * r)
    head, _ = adaptive_quad(integrand, 0.0, split, quad, points=[r * r] if r * r < split else None)
    tail, _ = adaptive_quad(integrand, split, np.inf, quad)
    return min(1.0, math.exp(-r) * (head + tail))


def psi_closed_form(r, params):
    """psi(r) = 2^{1-k} r^k K_k(r) / Gamma(k), vectorised; k = (d+alpha)/2"""
    r = np.asarray(r, dtype=float)
    _check_nonneg(r)
    k = _half_index(params)
    safe = np.where(r > 0.0, r, 1.0)
    with np.errstate(divide='ignore', over='ignore', under='ignore'):
        logv = (1.0 - k) * math.log(2.0) + k * np.log(safe) - special.gammaln(k) \
            + np.log(special.kve(k, safe)) - safe
        value = np.where(r > 0.0, np.exp(logv), 1.0)
    value = np.minimum(value, 1.0)
    return value if value.ndim else float(value)


def one_minus_psi(r, params, quad=DEFAULT_QUAD):
    """1 - psi(r) without cancellation: the integrand carries 1 - e^{-r^2/s} through expm1"""
    _check_nonneg(r)
    r = float(r)
    if r == 0.0:
        return 0.0
    k = _half_index(params)
    log_norm = -(params.d + params.alpha) * math.log(2.0) - special.gammaln(k)
    r2 = r * r

    def integrand(s):
        if s <= 0.0:
            return 0.0
        return math.exp((k - 1.0) * math.log(s) - 0.25 * s + log_norm) * -math.expm1(-r2 / s)

    # decades of s between r^2 and the bulk, so small r keeps each panel well scaled
    ladder = [r2 * 10.0 ** (4 * i) for i in range(1, 20) if r2 * 10.0 ** (4 * i) < 8.0]
    edges = sorted({0.0, r2, max(8.0, r2 + 8.0), *ladder})
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        total += adaptive_quad(integrand, lo, hi, quad, epsabs=0.0)[0]
    total += adaptive_quad(integrand, edges[-1], np.inf, quad, epsabs=0.0)[0]
    return min(1.0, max(0.0, total))


def phi(r, params):
    """phi(r) = e^{-r} (1 + r^{(d+alpha-1)/2})"""
    _check_nonneg(r)
    r = np.asarray(r, dtype=float)
    value = np.exp(-r) * (1.0 + r ** ((params.d + params.alpha - 1.0) / 2.0))
    return value if value.ndim else float(value)


def _branch(params):
    if params.d + params.alpha > 2.0:
        return 'high'
    if params.d == 1 and params.alpha < 1.0:
        return 'low'
    return 'critical'


def xi(r, params):
    """r^2 if d+alpha > 2; r^{1+alpha} if d = 1 > alpha; r^2 ln(1/r) if d = 1 = alpha"""
    r = float(r)
    if not r > 0.0:
        raise ParameterDomainError(f"xi is defined for r > 0, got {r!r}")
    branch = _branch(params)
    if branch == 'high':
        return r * r
    if branch == 'low':
        return r ** (1.0 + params.alpha)
    if r >= 1.0:
        raise ParameterDomainError(f"xi with d = 1 = alpha needs r < 1, got {r!r}")
    return r * r * math.log(1.0 / r)


def sigma(r, params):
    """r^{2-alpha-d} if d+alpha > 2; 1 if d = 1 > alpha; ln(1/r) if d = 1 = alpha; r in (0, 1]"""
    r = float(r)
    if not 0.0 < r <= 1.0:
        raise ParameterDomainError(f"sigma is defined on (0, 1], got {r!r}")
    branch = _branch(params)
    if branch == 'high':
        return r ** (2.0 - params.alpha - params.d)
    if branch == 'low':
        return 1.0
    return math.log(1.0 / r)


def stable_constant(params):
    """A(d, -alpha) = alpha 2^{alpha-1} pi^{-d/2} Gamma((d+alpha)/2) / Gamma(1 - alpha/2)"""
    d, alpha = params.d, params.alpha
    log_value = math.log(alpha) + (alpha - 1.0) * math.log(2.0) - 0.5 * d * math.log(math.pi) \
        + special.gammaln(0.5 * (d + alpha)) - special.gammaln(1.0 - 0.5 * alpha)
    return math.exp(log_value)


def sphere_area(d):
    """Surface area of the unit sphere in R^d (2 for d = 1)"""
    return 2.0 * math.pi ** (0.5 * d) / math.gamma(0.5 * d)


def tail_bound_constant(params, r_grid=None, quad=DEFAULT_QUAD):
    """
    Smallest c1 with psi(r) / (e^{-r} r^{(d+alpha-1)/2}) in [1/c1, c1] on the grid
    (default: 200 points of [1, 50]).
    """
    if r_grid is None:
        r_grid = np.linspace(1.0, 50.0, 200)
    expo = (params.d + params.alpha - 1.0) / 2.0
    ratios = np.array([psi(r, params, quad) / (math.exp(-r) * r ** expo) for r in r_grid])
    return float(max(ratios.max(), 1.0 / ratios.min()))


def xi_bound_constant(params, r_grid=None, quad=DEFAULT_QUAD):
    """Largest (1 - psi(r)) / xi(r) on a grid of (0, 1); the empirical C9"""
    if r_grid is None:
        r_grid = np.geomspace(1e-4, 0.99, 120)
    return float(max(one_minus_psi(r, params, quad) / xi(r, params) for r in r_grid))
