"""
Bounds Layer - closed-form comparators for heat kernels and Green functions

Each comparator is evaluated from |x - y| and the boundary distances
delta_D(x), delta_D(y); the *_from_deltas helpers take those directly.
"""
import math

import numpy as np

from relkernel.domain_layer import HalfSpace, IntervalUnion
from relkernel.errors import ParameterDomainError
from relkernel.logging_config import get_logger
from relkernel.special_layer import phi

logger = get_logger(__name__)


def _geometry(x, y, dom):
    """(|x - y|, delta_D(x), delta_D(y)) with membership checks"""
    x = np.asarray(x, dtype=float).reshape(dom.d)
    y = np.asarray(y, dtype=float).reshape(dom.d)
    for name, p in (('x', x), ('y', y)):
        if not dom.contains(p):
            raise ParameterDomainError(f"{name}={p.tolist()} is not in {dom.describe()}")
    return float(np.linalg.norm(x - y)), float(dom.dist_to_complement(x)), float(dom.dist_to_complement(y))


def _require_mass(params):
    if not params.m > 0.0:
        raise ParameterDomainError("this comparator needs m > 0; use v_alpha for bounded sets")


# heat kernel comparators

def q_small_time_from_deltas(t, r, dx, dy, params, c2_inner=1.0):
    if not t > 0.0:
        raise ParameterDomainError(f"t must be > 0, got {t!r}")
    if not c2_inner > 0.0:
        raise ParameterDomainError(f"c2_inner must be > 0, got {c2_inner!r}")
    a = params.alpha
    root_t = math.sqrt(t)
    boundary = min(1.0, dx ** (a / 2.0) / root_t) * min(1.0, dy ** (a / 2.0) / root_t)
    near = t ** (-params.d / a)
    if r == 0.0:
        return boundary * near
    far = t * phi(c2_inner * params.m_root * r, params) / r ** (params.d + a)
    return boundary * min(near, far)


def q_small_time(t, x, y, dom, params, c2_inner=1.0):
    """(1 ^ delta(x)^{a/2}/sqrt t)(1 ^ delta(y)^{a/2}/sqrt t) min(t^{-d/a}, t phi(c2 m^{1/a}|x-y|)/|x-y|^{d+a})"""
    r, dx, dy = _geometry(x, y, dom)
    return q_small_time_from_deltas(float(t), r, dx, dy, params, c2_inner)


def q_large_time_from_deltas(t, dx, dy, params, lambda1):
    if lambda1 is None or not lambda1 > 0.0:
        raise ParameterDomainError(f"lambda1 must be > 0, got {lambda1!r}")
    if t < 0.0:
        raise ParameterDomainError(f"t must be >= 0, got {t!r}")
    a = params.alpha
    return math.exp(-t * lambda1) * dx ** (a / 2.0) * dy ** (a / 2.0)


def q_large_time(t, x, y, dom, params, lambda1):
    """e^{-t lambda_1} delta(x)^{a/2} delta(y)^{a/2}"""
    if not dom.bounded:
        raise ParameterDomainError(f"the large-time form needs a bounded domain, got {dom.kind}")
    _, dx, dy = _geometry(x, y, dom)
    return q_large_time_from_deltas(float(t), dx, dy, params, lambda1)


# Green function comparators

def v_alpha_from_deltas(r, dx, dy, params):
    d, a = params.d, params.alpha
    if not r > 0.0:
        raise ParameterDomainError("V^alpha is singular at x = y")
    if d > a:
        return min(1.0, (dx * dy) ** (a / 2.0) / r ** a) * r ** (a - d)
    if a == 1.0:
        return math.log1p(math.sqrt(dx * dy) / r)
    return min((dx * dy) ** ((a - 1.0) / 2.0), (dx * dy) ** (a / 2.0) / r)


def v_alpha(x, y, dom, params):
    """Green comparator for bounded C^{1,1} sets; three branches d > a, d = 1 = a, d = 1 < a"""
    r, dx, dy = _geometry(x, y, dom)
    return v_alpha_from_deltas(r, dx, dy, params)


def v_tilde_from_deltas(r, dx, dy, params):
    _require_mass(params)
    if not r > 0.0:
        raise ParameterDomainError("the half-space-like comparator is singular at x = y")
    d, a, m = params.d, params.alpha, params.m
    lam = params.m_root
    far = r > 3.0 / lam
    low = min(dx, dy)
    m_outer = m ** ((2.0 - a) / a)
    m_half = m ** ((2.0 - a) / (2.0 * a))
    if d >= 2:
        # boundary weights delta + m^{-(2-a)/(2a)} delta^{a/2}
        wx = dx + dx ** (a / 2.0) / m_half
        wy = dy + dy ** (a / 2.0) / m_half
        if d >= 3:
            if far:
                return m_outer * min(1.0, wx * wy / r ** 2) * r ** (2.0 - d)
            return min(1.0, dx * dy / r ** 2) ** (a / 2.0) * r ** (a - d)
        if far:
            return m_outer * math.log1p(wx * wy / r ** 2)
        return min(1.0, dx * dy / r ** 2) ** (a / 2.0) * r ** (a - 2.0) + m_outer * math.log1p(lam * low)
    if a > 1.0:
        if far:
            return math.exp(-lam * r) / r ** (1.0 - a / 2.0) * min(1.0 / lam, low) ** (a / 2.0) \
                + m_outer * low + m_half * low ** (a / 2.0)
        return min((dx * dy) ** ((a - 1.0) / 2.0), (dx * dy) ** (a / 2.0) / r) + m_outer * math.sqrt(dx * dy)
    if a == 1.0:
        if far:
            # power of the minimum, as in the parallel alpha != 1 branches
            return math.exp(-m * r) / math.sqrt(r) * math.sqrt(min(1.0 / m, low)) + m * low + math.sqrt(m) * math.sqrt(low)
        return math.log1p(math.sqrt(dx * dy) / r) + math.sqrt(m) * math.sqrt(dx * dy)
    ratio = min(1.0, dx * dy / r ** 2) ** (a / 2.0)
    if far:
        return m ** -0.5 * math.exp(-lam * r) / r ** (1.0 - a / 2.0) * ratio + m_outer * low + m_half * low ** (a / 2.0)
    return r ** (a - 1.0) * ratio + m_outer * low


def v_tilde(x, y, dom, params):
    """Green comparator for half-space-like sets; near/far split at |x - y| = 3 m^{-1/alpha}"""
    r, dx, dy = _geometry(x, y, dom)
    return v_tilde_from_deltas(r, dx, dy, params)


def vtilde_branch_jump(dx, dy, params, eps=1e-6):
    """Ratio of the far to the near branch at |x - y| = 3 m^{-1/alpha} +- eps"""
    edge = 3.0 / params.m_root
    return v_tilde_from_deltas(edge + eps, dx, dy, params) / v_tilde_from_deltas(edge - eps, dx, dy, params)


def g_halfspace_d1(x, y, params):
    """Green comparator on the half-line (0, inf)"""
    _require_mass(params)
    x, y = float(x), float(y)
    if not (x > 0.0 and y > 0.0):
        raise ParameterDomainError(f"x and y must be > 0, got {x!r}, {y!r}")
    a, m = params.alpha, params.m
    lam = params.m_root
    r = abs(x - y)
    low = min(x, y)
    extra = m ** ((2.0 - a) / a) * low + m ** ((2.0 - a) / (2.0 * a)) * low ** (a / 2.0)
    if r == 0.0 and a <= 1.0:
        raise ParameterDomainError(f"the half-line comparator for alpha = {a:g} is singular at x = y")
    if a >= 1.0:
        scale = min(1.0 / lam, low)
        if r >= scale:
            return math.exp(-lam * r) / r ** (1.0 - a / 2.0) * scale ** (a / 2.0) + extra
        if a > 1.0:
            return scale ** (a - 1.0) + extra
        return math.log(2.0 * scale / r) + extra
    ratio = min(1.0, x * y / r ** 2) ** (a / 2.0)
    if r >= 1.0 / lam:
        return m ** -0.5 * math.exp(-lam * r) / r ** (1.0 - a / 2.0) * ratio + extra
    return r ** (a - 1.0) * ratio + extra


def g_halfspace_d_ge_2(x, y, params):
    """Green comparator on the upper half-space {x_d > 0}, d >= 2"""
    if params.d < 2:
        raise ParameterDomainError("use g_halfspace_d1 for d = 1")
    return v_tilde(x, y, HalfSpace(d=params.d, a=0.0), params)


# 3G checks on B = (0, 2)

def _three_g_setup(params):
    if params.d != 1 or params.alpha < 1.0:
        raise ParameterDomainError("the 3G comparator checks are stated for d = 1 and alpha >= 1")
    return IntervalUnion(d=1, intervals=((0.0, 2.0),))


def _f(dx, dy, r):
    return dx * dy / r ** 2


def three_g_supremum(params, n_triples=10000, rng=None, seed=0):
    """
    sup over sampled triples of V(x,y) V(y,z) / V(x,z) on B = (0, 2); for alpha = 1
    the ratio is divided by 1 + F(x,y) + F(y,z), F = log(1 + f^{1/2}).
    """
    _three_g_setup(params)
    rng = rng if rng is not None else np.random.default_rng(seed)
    pts = rng.uniform(0.0, 2.0, size=(n_triples, 3))
    best = 0.0
    for x, y, z in pts:
        if x == y or y == z or x == z:
            continue
        dx, dy, dz = min(x, 2 - x), min(y, 2 - y), min(z, 2 - z)
        ratio = v_alpha_from_deltas(abs(x - y), dx, dy, params) * v_alpha_from_deltas(abs(y - z), dy, dz, params) \
            / v_alpha_from_deltas(abs(x - z), dx, dz, params)
        if params.alpha == 1.0:
            ratio /= 1.0 + math.log1p(math.sqrt(_f(dx, dy, abs(x - y)))) + math.log1p(math.sqrt(_f(dy, dz, abs(y - z))))
        best = max(best, ratio)
    return best


def four_point_supremum(params, n_samples=10000, rng=None, seed=0):
    """
    sup of V(x,y) V(z,w) / V(x,w) over samples with f(x, w) >= 4, divided by
    delta(y)^{(a-1)/2} delta(z)^{(a-1)/2} (alpha > 1) or F(x,y) F(z,w) (alpha = 1).
    """
    _three_g_setup(params)
    a = params.alpha
    rng = rng if rng is not None else np.random.default_rng(seed)
    best = 0.0
    kept = 0
    for _ in range(n_samples):
        x = rng.uniform(0.0, 2.0)
        dx = min(x, 2 - x)
        # f(x, w) >= 4 forces |x - w| <= delta(x)/2 at most
        w = x + rng.uniform(-0.5, 0.5) * dx
        y, z = rng.uniform(0.0, 2.0, size=2)
        if not 0.0 < w < 2.0 or w == x or y == x or z == w:
            continue
        dw, dy, dz = min(w, 2 - w), min(y, 2 - y), min(z, 2 - z)
        if _f(dx, dw, abs(x - w)) < 4.0:
            continue
        kept += 1
        ratio = v_alpha_from_deltas(abs(x - y), dx, dy, params) * v_alpha_from_deltas(abs(z - w), dz, dw, params) \
            / v_alpha_from_deltas(abs(x - w), dx, dw, params)
        if a > 1.0:
            ratio /= (dy * dz) ** ((a - 1.0) / 2.0)
        else:
            ratio /= math.log1p(math.sqrt(_f(dx, dy, abs(x - y)))) * math.log1p(math.sqrt(_f(dz, dw, abs(z - w))))
        best = max(best, ratio)
    logger.debug("four-point check kept %d of %d samples", kept, n_samples)
    return best
