"""
Kernel Layer - free transition density p^m(t, x) by Gaussian subordination

The alpha/2-stable subordinator density is evaluated from the one-sided
stable density of index beta = alpha/2 (Laplace transform exp(-lambda^beta))
through the Kanter single-integral form for moderate arguments and the
convergent power series in the far tail. p^m is then the mixture of Gaussian
densities against that subordinator, tilted by exp(-m^{2/alpha} u) and
renormalised by exp(m t).

Two evaluation paths exist:
- free_kernel: adaptive panels in ln z, memoised, used as the reference;
- KernelTable: one tabulation per (params, t) on a log-radial grid with a
  cubic spline in log-log coordinates, used by the estimators.
"""
import math
import threading
from dataclasses import replace
from functools import lru_cache

import numpy as np
from scipy import optimize, special
from scipy.interpolate import CubicSpline

from relkernel.config import DEFAULT_QUAD, ModelParams, QuadratureConfig
from relkernel.errors import ParameterDomainError, QuadratureError
from relkernel.levy_layer import levy_density, levy_density_array
from relkernel.logging_config import get_logger
from relkernel.special_layer import adaptive_quad

logger = get_logger(__name__)

# switch to the tail series once z^{-beta} is below this
_SERIES_SWITCH = 0.2
_SERIES_TERMS = 80
# exp(-a0 c) below e^{-60} is treated as zero
_LEFT_CUTOFF = 60.0
_PANEL_WIDTH = 0.25
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
# outer mixture panels; a looser caller tolerance relaxes rel_tol, a tighter one cannot beat 1e-9
_KERNEL_QUAD = QuadratureConfig(rel_tol=1e-9, abs_tol=0.0, max_subdivisions=200)


def _check_index(alpha):
    alpha = float(alpha)
    if not 0.0 < alpha < 2.0:
        raise ParameterDomainError(f"alpha must lie in (0, 2), got {alpha!r}")
    return alpha


def _log_a(phi, beta):
    """log of the Kanter function a(phi) = [sin(beta phi)/sin phi]^{1/(1-beta)} sin((1-beta)phi)/sin(beta phi)"""
    sb = math.log(math.sin(beta * phi))
    return (sb - math.log(math.sin(phi))) / (1.0 - beta) + math.log(math.sin((1.0 - beta) * phi)) - sb


def _log_a0(beta):
    """log a(0+) = log((1 - beta) beta^{beta/(1-beta)})"""
    return math.log(1.0 - beta) + beta / (1.0 - beta) * math.log(beta)


def _series_switch_z(beta):
    return _SERIES_SWITCH ** (-1.0 / beta)


def _left_cutoff_z(beta):
    """z below which exp(-a0 z^{-beta/(1-beta)}) < e^{-60}"""
    return (_LEFT_CUTOFF / math.exp(_log_a0(beta))) ** (-(1.0 - beta) / beta)


def _kanter(z, beta, quad, cdf=False):
    """Kanter integral for the standard one-sided stable density (or cdf) at z > 0"""
    c = z ** (-beta / (1.0 - beta))
    a0 = math.exp(_log_a0(beta))
    if a0 * c > 745.0:
        return 0.0

    def integrand(phi):
        if phi <= 0.0 or phi >= math.pi:
            return 0.0
        la = _log_a(phi, beta)
        if la > 700.0:
            return 0.0
        excess = (math.exp(la) - a0) * c
        return math.exp(-excess) if cdf else math.exp(la - excess)

    points = None
    if a0 * c < 1.0:
        # a(phi) c = 1 marks the peak of the density integrand
        eps = 1e-12
        target = lambda phi: _log_a(phi, beta) + math.log(c)
        try:
            points = [optimize.brentq(target, eps, math.pi - eps, xtol=1e-14)]
        except ValueError:
            points = None
    value = 0.0
    edges = [0.0] + (points or []) + [math.pi]
    for lo, hi in zip(edges[:-1], edges[1:]):
        value += adaptive_quad(integrand, lo, hi, quad, epsabs=0.0)[0]
    value *= math.exp(-a0 * c) / math.pi
    if cdf:
        return min(1.0, value)
    return beta / (1.0 - beta) * z ** (-1.0 / (1.0 - beta)) * value


def _series_terms(beta, n_terms=_SERIES_TERMS):
    n = np.arange(1, n_terms + 1, dtype=float)
    signs = np.where(n % 2 == 1, 1.0, -1.0)
    sines = np.sin(n * math.pi * beta)
    dens = signs * sines * np.exp(special.gammaln(n * beta + 1.0) - special.gammaln(n + 1.0)) / math.pi
    tail = signs * sines * np.exp(special.gammaln(n * beta) - special.gammaln(n + 1.0)) / math.pi
    return n, dens, tail


def _series_density(z, beta):
    """Convergent tail series of the standard one-sided stable density, vectorised in z"""
    z = np.asarray(z, dtype=float)
    n, dens, _ = _series_terms(beta)
    powers = np.exp(-np.multiply.outer(np.log(z), n * beta + 1.0))
    return powers @ dens


def _series_survival(z, beta):
    z = np.asarray(z, dtype=float)
    n, _, tail = _series_terms(beta)
    powers = np.exp(-np.multiply.outer(np.log(z), n * beta))
    return powers @ tail


def standard_subordinator_density(z, alpha, quad=DEFAULT_QUAD):
    """Density at z > 0 of the alpha/2-stable subordinator at time 1"""
    alpha = _check_index(alpha)
    z = float(z)
    if not z > 0.0:
        raise ParameterDomainError(f"level must be > 0, got {z!r}")
    if alpha == 1.0:
        return z ** -1.5 * math.exp(-0.25 / z) / (2.0 * math.sqrt(math.pi))
    beta = alpha / 2.0
    if z >= _series_switch_z(beta):
        return max(0.0, float(_series_density(z, beta)))
    return _kanter(z, beta, quad)


def subordinator_density(t, u, alpha, quad=DEFAULT_QUAD):
    """
    theta_alpha(t, u): density at level u of the alpha/2-stable subordinator at
    time t, with Laplace transform exp(-t lambda^{alpha/2}).
    """
    alpha = _check_index(alpha)
    t, u = float(t), float(u)
    if not (t > 0.0 and u > 0.0):
        raise ParameterDomainError(f"t and u must be > 0, got t={t!r}, u={u!r}")
    if alpha == 1.0:
        return t * u ** -1.5 * math.exp(-t * t / (4.0 * u)) / (2.0 * math.sqrt(math.pi))
    scale = t ** (2.0 / alpha)
    return standard_subordinator_density(u / scale, alpha, quad) / scale


def subordinator_cdf(t, u, alpha, quad=DEFAULT_QUAD):
    """P(S_t <= u) for the alpha/2-stable subordinator"""
    alpha = _check_index(alpha)
    t, u = float(t), float(u)
    if not (t > 0.0 and u > 0.0):
        raise ParameterDomainError(f"t and u must be > 0, got t={t!r}, u={u!r}")
    if alpha == 1.0:
        return math.erfc(t / (2.0 * math.sqrt(u)))
    beta = alpha / 2.0
    z = u / t ** (1.0 / beta)
    if z >= _series_switch_z(beta):
        return min(1.0, max(0.0, 1.0 - float(_series_survival(z, beta))))
    return _kanter(z, beta, quad, cdf=True)


def theta_bound_constant(alpha, t_grid=None, u_grid=None, quad=DEFAULT_QUAD):
    """max of theta(t, u) / (t u^{-1-alpha/2}) over a (t, u) grid"""
    t_grid = np.geomspace(0.05, 5.0, 6) if t_grid is None else t_grid
    u_grid = np.geomspace(1e-3, 1e3, 40) if u_grid is None else u_grid
    return float(max(subordinator_density(t, u, alpha, quad) / (t * u ** (-1.0 - alpha / 2.0))
                     for t in t_grid for u in u_grid))


def _reduce(t, params):
    """
    Map (t, params) to a reference problem.

    m = 0 uses stable scaling to time 1; m > 0 uses p^m(t, r) = m^{d/alpha} p^1(m t, m^{1/alpha} r).
    Returns (tau, radius factor, value factor, tilted).
    """
    d, alpha = params.d, params.alpha
    if params.m == 0.0:
        return 1.0, t ** (-1.0 / alpha), t ** (-d / alpha), False
    return params.m * t, params.m_root, params.m ** (d / alpha), True


def _radius(x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(x)):
        raise ParameterDomainError("displacement must be finite")
    return float(np.linalg.norm(x))


class _KernelMemo:
    """Memo of free_kernel values keyed by rounded arguments; safe for concurrent use"""

    def __init__(self, max_entries=100000):
        self._lock = threading.Lock()
        self._values = {}
        self.max_entries = max_entries

    @staticmethod
    def key(t, r, params, quad):
        return (round(t, 12), round(r, 12), params.d, params.alpha, params.m, quad.rel_tol)

    def get(self, key):
        with self._lock:
            return self._values.get(key)

    def put(self, key, value):
        with self._lock:
            if len(self._values) >= self.max_entries:
                self._values.clear()
            self._values[key] = value

    def clear(self):
        with self._lock:
            self._values.clear()


_memo = _KernelMemo()


def clear_kernel_cache():
    _memo.clear()
    kernel_table.cache_clear()


def _mixture_integrand(tau, rho, d, alpha, tilt_rate, quad):
    """Integrand in x = ln z of the Gaussian mixture at reduced time tau and radius rho"""
    beta = alpha / 2.0
    u_scale = tau ** (1.0 / beta)

    def integrand(x):
        z = math.exp(x)
        g = standard_subordinator_density(z, alpha, quad)
        if g == 0.0:
            return 0.0
        u = u_scale * z
        log_val = x + math.log(g) - 0.5 * d * math.log(4.0 * math.pi * u) - rho * rho / (4.0 * u) - tilt_rate * u
        return math.exp(log_val) if log_val > -745.0 else 0.0

    return integrand


def _mixture_edges(tau, rho, d, alpha, tilt_rate):
    """Panel edges in ln z: subordinator scale, series switch, Gaussian saddle, tilt scale"""
    beta = alpha / 2.0
    u_scale = tau ** (1.0 / beta)
    lo = math.log(_left_cutoff_z(beta))
    marks = [0.0, math.log(_series_switch_z(beta))]
    if rho > 0.0:
        marks.append(math.log(rho * rho / (2.0 * d) / u_scale))
    if tilt_rate > 0.0:
        marks.append(math.log(1.0 / (tilt_rate * u_scale)))
        hi = math.log(750.0 / (tilt_rate * u_scale))
    else:
        hi = max(marks + [lo]) + 40.0 / (beta + 0.5 * d)
    if rho > 0.0:
        # the Gaussian factor vanishes for u << rho^2
        lo = max(lo, math.log(rho * rho / 3000.0 / u_scale))
    interior = sorted(p for p in marks if lo < p < hi)
    return [lo] + interior + [hi] if hi > lo else []


def _outer_quad(quad):
    """Panel tolerance for the Gaussian mixture under the caller's quad"""
    return replace(_KERNEL_QUAD, rel_tol=max(float(quad.rel_tol), _KERNEL_QUAD.rel_tol))


def _panel_sum(integrand, edges, quad):
    total, failures = 0.0, []
    for lo, hi in zip(edges[:-1], edges[1:]):
        try:
            total += adaptive_quad(integrand, lo, hi, quad, epsabs=0.0)[0]
        except QuadratureError as exc:
            total += exc.partial or 0.0
            failures.append(exc)
    for exc in failures:
        if exc.abs_error is not None and exc.abs_error > 1e-7 * abs(total):
            raise QuadratureError(f"free kernel quadrature failed: {exc}", partial=total, abs_error=exc.abs_error)
    return total


def _reference_kernel(tau, rho, params, tilted, quad):
    d, alpha = params.d, params.alpha
    tilt_rate = 1.0 if tilted else 0.0
    edges = _mixture_edges(tau, rho, d, alpha, tilt_rate)
    if not edges:
        return 0.0
    integrand = _mixture_integrand(tau, rho, d, alpha, tilt_rate, quad)
    value = _panel_sum(integrand, edges, _outer_quad(quad))
    return value * math.exp(tau) if tilted else value


def free_kernel(t, x, params, quad=DEFAULT_QUAD):
    """
    p^m(t, x): density of X^m_t at displacement x (a vector or a scalar for d = 1).

    m > 0 is routed through the m = 1 kernel by the scaling law; m = 0 is the
    symmetric stable density through the untilted subordinator.
    """
    t = float(t)
    if not t > 0.0:
        raise ParameterDomainError(f"t must be > 0, got {t!r}")
    r = _radius(x)
    key = _memo.key(t, r, params, quad)
    cached = _memo.get(key)
    if cached is not None:
        return cached
    tau, radius_factor, value_factor, tilted = _reduce(t, params)
    value = value_factor * _reference_kernel(tau, r * radius_factor, params, tilted, quad)
    _memo.put(key, value)
    return value


def free_kernel_tilted(t, x, params, quad=DEFAULT_QUAD):
    """p^m(t, x) = e^{m t} int (4 pi u)^{-d/2} e^{-|x|^2/4u} e^{-m^{2/alpha} u} theta(t, u) du, no scaling"""
    t = float(t)
    if not t > 0.0:
        raise ParameterDomainError(f"t must be > 0, got {t!r}")
    r = _radius(x)
    edges = _mixture_edges(t, r, params.d, params.alpha, params.m_sq)
    if not edges:
        return 0.0
    integrand = _mixture_integrand(t, r, params.d, params.alpha, params.m_sq, quad)
    value = _panel_sum(integrand, edges, _outer_quad(quad))
    return value * math.exp(params.m * t)


def free_kernel_comparator(t, r, params, quad=DEFAULT_QUAD):
    """min(t^{-d/alpha}, t j^m(r)); r = 0 gives t^{-d/alpha}"""
    t, r = float(t), float(r)
    if not t > 0.0:
        raise ParameterDomainError(f"t must be > 0, got {t!r}")
    near = t ** (-params.d / params.alpha)
    if r == 0.0:
        return near
    return min(near, t * levy_density(r, params, quad))


@lru_cache(maxsize=16)
def _kanter_nodes(alpha):
    """Composite Gauss-Legendre nodes in ln z with the Kanter density, up to the series switch"""
    beta = alpha / 2.0
    lo = math.log(_left_cutoff_z(beta))
    hi = math.log(_series_switch_z(beta))
    return _gl_nodes(lo, hi, alpha)


def _gl_nodes(lo, hi, alpha, series=False):
    if hi <= lo:
        return np.empty(0), np.empty(0), np.empty(0)
    n_panels = max(1, int(math.ceil((hi - lo) / _PANEL_WIDTH)))
    edges = np.linspace(lo, hi, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    beta = alpha / 2.0
    if alpha == 1.0:
        z = np.exp(x)
        g = z ** -1.5 * np.exp(-0.25 / z) / (2.0 * math.sqrt(math.pi))
    elif series:
        g = np.maximum(_series_density(np.exp(x), beta), 0.0)
    else:
        g = np.array([standard_subordinator_density(math.exp(v), alpha) for v in x])
    return x, w, g


class KernelTable:
    """
    Tabulated p^m(t, r) for one (params, t), vectorised over r.

    Between r_min and r_max a cubic spline in (ln r, ln p) interpolates the
    Gaussian-mixture quadrature; below r_min the kernel is flat and beyond
    r_max it follows t j^m(r) matched at r_max.
    """

    def __init__(self, params, t, n_radii=400, span=1e4):
        t = float(t)
        if not t > 0.0:
            raise ParameterDomainError(f"t must be > 0, got {t!r}")
        self.params = params
        self.t = t
        d, alpha = params.d, params.alpha
        beta = alpha / 2.0
        tau, self._radius_factor, self._value_factor, tilted = _reduce(t, params)
        self._tilted = tilted
        scale = tau ** (1.0 / alpha)
        if tilted:
            scale = max(scale, math.sqrt(tau))
        rho = np.geomspace(scale / span, scale * span, n_radii)

        u_scale = tau ** (1.0 / beta)
        kx, kw, kg = _kanter_nodes(alpha)
        switch = math.log(_series_switch_z(beta))
        if tilted:
            top = math.log(750.0 / u_scale)
        else:
            top = math.log(max(rho[-1] ** 2 / u_scale, 1.0)) + 40.0 / (beta + 0.5 * d)
        if alpha == 1.0:
            kx, kw, kg = _gl_nodes(math.log(_left_cutoff_z(beta)), top, alpha)
        else:
            sx, sw, sg = _gl_nodes(switch, top, alpha, series=True)
            kx, kw, kg = np.concatenate([kx, sx]), np.concatenate([kw, sw]), np.concatenate([kg, sg])
        keep = (kx < top) & (kg > 0.0)
        x, w, g = kx[keep], kw[keep], kg[keep]
        u = u_scale * np.exp(x)
        log_weight = np.log(w) + x + np.log(g) - 0.5 * d * np.log(4.0 * math.pi * u)
        if tilted:
            log_weight = log_weight - u
        exponent = log_weight[None, :] - (rho[:, None] ** 2) / (4.0 * u[None, :])
        log_p = special.logsumexp(exponent, axis=1) + (tau if tilted else 0.0)

        finite = np.isfinite(log_p) & (log_p > -690.0)
        if finite.sum() < 10:
            raise QuadratureError(f"kernel table for t={t} has too few representable values")
        last = int(np.nonzero(finite)[0][-1])
        rho, log_p = rho[:last + 1], log_p[:last + 1]
        self._rho_min, self._rho_max = float(rho[0]), float(rho[-1])
        self._log_p_min, self._log_p_max = float(log_p[0]), float(log_p[-1])
        self._spline = CubicSpline(np.log(rho), log_p)
        self._tail_params = ModelParams(d=d, alpha=alpha, m=1.0 if tilted else 0.0)
        self._tail_ref = float(levy_density_array(self._rho_max, self._tail_params))
        logger.debug("kernel table t=%g: %d radii, %d nodes, rho in [%.3g, %.3g]",
                     t, rho.size, u.size, self._rho_min, self._rho_max)

    def __call__(self, r):
        """p^m(t, r) for radii r >= 0 (array or scalar)"""
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        rho = np.atleast_1d(np.abs(r) * self._radius_factor)
        out = np.empty_like(rho)
        low = rho <= self._rho_min
        high = rho >= self._rho_max
        mid = ~(low | high)
        out[low] = math.exp(self._log_p_min)
        out[mid] = np.exp(self._spline(np.log(rho[mid])))
        if np.any(high):
            with np.errstate(under='ignore'):
                ratio = levy_density_array(rho[high], self._tail_params) / self._tail_ref
            out[high] = math.exp(self._log_p_max) * ratio
        out *= self._value_factor
        return float(out[0]) if scalar else out

    def density(self, displacement):
        """p^m(t, x) for an (n, d) array of displacements"""
        displacement = np.asarray(displacement, dtype=float)
        if displacement.ndim == 1:
            displacement = displacement[:, None] if self.params.d == 1 else displacement[None, :]
        return self(np.linalg.norm(displacement, axis=-1))


@lru_cache(maxsize=64)
def kernel_table(params, t):
    """Cached KernelTable; t is rounded to 12 significant digits by callers"""
    return KernelTable(params, t)
