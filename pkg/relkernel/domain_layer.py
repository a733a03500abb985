"""
Domain Layer - C^{1,1} exemplar open sets with exact distance to the complement

All queries accept a single point (shape (d,)) or a batch (shape (n, d)) and
return a scalar or an array accordingly. Domains are immutable.
"""
import math
import re
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from relkernel.errors import ConfigError, ParameterDomainError
from relkernel.logging_config import get_logger

logger = get_logger(__name__)


def _as_points(x, d):
    """Return (array of shape (n, d), was_single)"""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ParameterDomainError("points must have finite coordinates")
    if d == 1 and arr.ndim == 0:
        return arr.reshape(1, 1), True
    if arr.ndim == 1:
        if arr.shape[0] != d:
            if d == 1:
                return arr.reshape(-1, 1), False
            raise ParameterDomainError(f"point has dimension {arr.shape[0]}, domain has {d}")
        return arr.reshape(1, d), True
    if arr.ndim != 2 or arr.shape[1] != d:
        raise ParameterDomainError(f"points have shape {arr.shape}, domain has dimension {d}")
    return arr, False


def _unwrap(values, single):
    return values[0].item() if single else values


def _vector(value, d, name):
    arr = np.zeros(d) if value is None else np.atleast_1d(np.asarray(value, dtype=float))
    if arr.shape != (d,):
        raise ConfigError(name, f"must have {d} coordinates, got {arr.tolist()}")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class Domain:
    """Base class; subclasses implement _contains, _dist and _nearest"""

    d: int
    r0: float = field(default=math.inf)

    kind = 'abstract'
    bounded = False

    def contains(self, x):
        pts, single = _as_points(x, self.d)
        return _unwrap(self._contains(pts), single)

    def dist_to_complement(self, x):
        pts, single = _as_points(x, self.d)
        inside = self._contains(pts)
        out = np.zeros(pts.shape[0])
        if np.any(inside):
            out[inside] = self._dist(pts[inside])
        return _unwrap(out, single)

    def interior_ball_witness(self, x):
        """Center x0 = z + r0 (x - z)/|x - z| and radius r0 of an interior ball touching the boundary at z"""
        pts, _ = _as_points(x, self.d)
        point = pts[0]
        if not self._contains(pts)[0]:
            raise ParameterDomainError(f"{point.tolist()} is not in the {self.kind} domain")
        delta = float(self._dist(pts)[0])
        if not math.isfinite(self.r0) or delta >= self.r0:
            raise ParameterDomainError(f"no witness needed: delta={delta:g} >= r0={self.r0:g}")
        z = self._nearest(point)
        direction = (point - z) / np.linalg.norm(point - z)
        return z + self.r0 * direction, self.r0

    def nearest_boundary_point(self, x):
        pts, _ = _as_points(x, self.d)
        return self._nearest(pts[0])

    def sample_interior(self, rng, n, delta_range=None, window=10.0, max_rounds=200):
        """Rejection-sample n points of D (optionally with delta in [lo, hi]) from a bounding box"""
        lo_box, hi_box = self.bounding_box(window)
        lo_delta, hi_delta = delta_range if delta_range is not None else (0.0, math.inf)
        accepted = []
        total = 0
        for _ in range(max_rounds):
            cand = rng.uniform(lo_box, hi_box, size=(max(4 * n, 64), self.d))
            keep = self._contains(cand)
            cand = cand[keep]
            if delta_range is not None and cand.size:
                delta = self._dist(cand)
                cand = cand[(delta >= lo_delta) & (delta <= hi_delta)]
            accepted.append(cand)
            total += cand.shape[0]
            if total >= n:
                break
        pts = np.concatenate(accepted)[:n] if accepted else np.empty((0, self.d))
        if pts.shape[0] < n:
            raise ParameterDomainError(f"could only sample {pts.shape[0]} of {n} points in {self.describe()}")
        return pts

    def anchor_point(self):
        """A point of maximal distance to the complement (bounded kinds)"""
        raise ParameterDomainError(f"{self.kind} has no anchor point")

    @property
    def inradius(self):
        return math.inf

    def describe(self):
        return self.kind

    def to_dict(self):
        out = {'kind': self.kind, 'd': self.d}
        for key, value in self.__dict__.items():
            if key in ('d',):
                continue
            if isinstance(value, float) and math.isinf(value):
                value = None
            out[key] = [list(v) if isinstance(v, tuple) else v for v in value] if isinstance(value, tuple) else value
        return out


@dataclass(frozen=True)
class FullSpace(Domain):
    kind = 'full-space'

    def _contains(self, pts):
        return np.ones(pts.shape[0], dtype=bool)

    def _dist(self, pts):
        return np.full(pts.shape[0], math.inf)

    def _nearest(self, point):
        raise ParameterDomainError("the full space has no boundary")

    def bounding_box(self, window):
        return -window * np.ones(self.d), window * np.ones(self.d)

    def scaled(self, factor):
        return self


@dataclass(frozen=True)
class Ball(Domain):
    center: tuple = None
    radius: float = 1.0

    kind = 'ball'
    bounded = True

    def __post_init__(self):
        object.__setattr__(self, 'center', _vector(self.center, self.d, 'center'))
        if not self.radius > 0:
            raise ConfigError('radius', f"must be > 0, got {self.radius!r}")
        if math.isinf(self.r0):
            object.__setattr__(self, 'r0', float(self.radius))
        elif not 0 < self.r0 <= self.radius:
            raise ConfigError('r0', f"must lie in (0, {self.radius}], got {self.r0!r}")

    def _contains(self, pts):
        return np.linalg.norm(pts - np.asarray(self.center), axis=1) < self.radius

    def _dist(self, pts):
        return np.maximum(self.radius - np.linalg.norm(pts - np.asarray(self.center), axis=1), 0.0)

    def _nearest(self, point):
        c = np.asarray(self.center)
        offset = point - c
        norm = np.linalg.norm(offset)
        if norm == 0.0:
            offset, norm = np.eye(self.d)[0], 1.0
        return c + self.radius * offset / norm

    def bounding_box(self, window):
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius

    def anchor_point(self):
        return np.asarray(self.center)

    @property
    def inradius(self):
        return self.radius

    def scaled(self, factor):
        return replace(self, center=tuple(factor * v for v in self.center), radius=factor * self.radius,
                       r0=factor * self.r0)

    def describe(self):
        return f"ball(radius={self.radius:g})"


@dataclass(frozen=True)
class Annulus(Domain):
    center: tuple = None
    r_in: float = 0.5
    r_out: float = 1.0

    kind = 'annulus'
    bounded = True

    def __post_init__(self):
        object.__setattr__(self, 'center', _vector(self.center, self.d, 'center'))
        if not 0 < self.r_in < self.r_out:
            raise ConfigError('r_in', f"need 0 < r_in < r_out, got {self.r_in!r}, {self.r_out!r}")
        limit = min(0.5 * (self.r_out - self.r_in), self.r_in)
        if math.isinf(self.r0):
            object.__setattr__(self, 'r0', float(limit))
        elif not 0 < self.r0 <= limit:
            raise ConfigError('r0', f"must lie in (0, {limit:g}], got {self.r0!r}")

    def _radii(self, pts):
        return np.linalg.norm(pts - np.asarray(self.center), axis=1)

    def _contains(self, pts):
        rad = self._radii(pts)
        return (rad > self.r_in) & (rad < self.r_out)

    def _dist(self, pts):
        rad = self._radii(pts)
        return np.maximum(np.minimum(rad - self.r_in, self.r_out - rad), 0.0)

    def _nearest(self, point):
        c = np.asarray(self.center)
        offset = point - c
        norm = np.linalg.norm(offset)
        target = self.r_in if norm - self.r_in <= self.r_out - norm else self.r_out
        return c + target * offset / norm

    def bounding_box(self, window):
        c = np.asarray(self.center)
        return c - self.r_out, c + self.r_out

    def anchor_point(self):
        return np.asarray(self.center) + 0.5 * (self.r_in + self.r_out) * np.eye(self.d)[0]

    @property
    def inradius(self):
        return 0.5 * (self.r_out - self.r_in)

    def scaled(self, factor):
        return replace(self, center=tuple(factor * v for v in self.center), r_in=factor * self.r_in,
                       r_out=factor * self.r_out, r0=factor * self.r0)

    def describe(self):
        return f"annulus(r_in={self.r_in:g}, r_out={self.r_out:g})"


@dataclass(frozen=True)
class HalfSpace(Domain):
    """H_a = {x : x_d > a}"""

    a: float = 0.0

    kind = 'half-space'

    def __post_init__(self):
        if not self.r0 > 0:
            raise ConfigError('r0', f"must be > 0, got {self.r0!r}")

    def _contains(self, pts):
        return pts[:, -1] > self.a

    def _dist(self, pts):
        return np.maximum(pts[:, -1] - self.a, 0.0)

    def _nearest(self, point):
        z = point.copy()
        z[-1] = self.a
        return z

    def bounding_box(self, window):
        lo = -window * np.ones(self.d)
        hi = window * np.ones(self.d)
        lo[-1], hi[-1] = self.a, self.a + window
        return lo, hi

    def scaled(self, factor):
        return replace(self, a=factor * self.a, r0=factor * self.r0)

    def describe(self):
        return f"half-space(a={self.a:g})"


def _bump(s):
    """(1 - s^2)^2 on |s| < 1, zero outside; C^{1,1} with |h''| <= 8"""
    s = np.abs(s)
    return np.where(s < 1.0, (1.0 - s * s) ** 2, 0.0)


def _bump_prime(s):
    sign = np.sign(s)
    s = np.abs(s)
    return np.where(s < 1.0, -4.0 * s * (1.0 - s * s) * sign, 0.0)


@dataclass(frozen=True)
class BumpHalfSpace(Domain):
    """
    {x : x_d > f(|x'|)} with f(s) = a - (a - b) h(s / width), h a C^{1,1} bump.

    Contains H_a and is contained in H_b (a > b); the boundary dips to height b
    over the origin of the first d - 1 coordinates.
    """

    a: float = 1.0
    b: float = 0.0
    width: float = 2.0

    kind = 'half-space-like'

    def __post_init__(self):
        if self.d < 2:
            raise ConfigError('d', "half-space-like bump domains need d >= 2")
        if not self.a > self.b:
            raise ConfigError('a', f"need a > b, got a={self.a!r}, b={self.b!r}")
        if not self.width > 0:
            raise ConfigError('width', f"must be > 0, got {self.width!r}")
        # curvature of the graph is at most sup|f''| = 8 (a - b) / width^2
        limit = self.width ** 2 / (16.0 * (self.a - self.b))
        if math.isinf(self.r0):
            object.__setattr__(self, 'r0', float(limit))
        elif not 0 < self.r0 <= limit:
            raise ConfigError('r0', f"must lie in (0, {limit:g}], got {self.r0!r}")

    def height(self, s):
        return self.a - (self.a - self.b) * _bump(np.asarray(s, dtype=float) / self.width)

    def _slope(self, s):
        return -(self.a - self.b) * _bump_prime(np.asarray(s, dtype=float) / self.width) / self.width

    def _contains(self, pts):
        radial = np.linalg.norm(pts[:, :-1], axis=1)
        return pts[:, -1] > self.height(radial)

    def _project(self, point):
        """Nearest graph point in the plane through e_d and x'; returns (s, distance, unit x')"""
        xp = point[:-1]
        rho = float(np.linalg.norm(xp))
        unit = xp / rho if rho > 0 else np.eye(self.d - 1)[0]
        xd = float(point[-1])
        upper = abs(xd - float(self.height(rho)))
        # the projection lies within the vertical distance of rho along the ray
        lo, hi = rho - upper, rho + upper
        grid = np.linspace(lo, hi, 401)
        gap = (grid - rho) ** 2 + (xd - self.height(np.abs(grid))) ** 2
        k = int(np.argmin(gap))

        def slope_of_gap(s):
            h = float(self.height(abs(s)))
            return (s - rho) - (xd - h) * float(self._slope(abs(s))) * np.sign(s)

        best_s = float(grid[k])
        a_br, b_br = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
        if slope_of_gap(a_br) * slope_of_gap(b_br) < 0:
            best_s = optimize.brentq(slope_of_gap, a_br, b_br, xtol=1e-10)
        dist = math.hypot(best_s - rho, xd - float(self.height(abs(best_s))))
        return best_s, dist, unit

    def _dist(self, pts):
        return np.array([self._project(p)[1] if self._contains(p[None, :])[0] else 0.0 for p in pts])

    def _nearest(self, point):
        s, _, unit = self._project(point)
        z = np.empty(self.d)
        z[:-1] = s * unit
        z[-1] = float(self.height(abs(s)))
        return z

    def bounding_box(self, window):
        lo = -window * np.ones(self.d)
        hi = window * np.ones(self.d)
        lo[-1], hi[-1] = self.b, self.a + window
        return lo, hi

    def scaled(self, factor):
        return replace(self, a=factor * self.a, b=factor * self.b, width=factor * self.width, r0=factor * self.r0)

    def describe(self):
        return f"half-space-like(a={self.a:g}, b={self.b:g}, width={self.width:g})"


@dataclass(frozen=True)
class IntervalUnion(Domain):
    """Finite union of disjoint open intervals in R (d = 1)"""

    intervals: tuple = ((0.0, 2.0),)

    kind = 'interval-union'
    bounded = True

    def __post_init__(self):
        if self.d != 1:
            raise ConfigError('d', "interval unions live in d = 1")
        ivs = tuple(sorted((float(lo), float(hi)) for lo, hi in self.intervals))
        if not ivs:
            raise ConfigError('intervals', "need at least one interval")
        for lo, hi in ivs:
            if not lo < hi:
                raise ConfigError('intervals', f"empty interval ({lo}, {hi})")
        gaps = [ivs[i + 1][0] - ivs[i][1] for i in range(len(ivs) - 1)]
        if gaps and min(gaps) <= 0:
            raise ConfigError('intervals', "intervals must be pairwise disjoint with a positive gap")
        object.__setattr__(self, 'intervals', ivs)
        limit = min([0.5 * (hi - lo) for lo, hi in ivs] + [0.5 * g for g in gaps])
        if math.isinf(self.r0):
            object.__setattr__(self, 'r0', float(limit))
        elif not 0 < self.r0 <= limit:
            raise ConfigError('r0', f"must lie in (0, {limit:g}], got {self.r0!r}")

    def _contains(self, pts):
        x = pts[:, 0]
        inside = np.zeros(x.shape[0], dtype=bool)
        for lo, hi in self.intervals:
            inside |= (x > lo) & (x < hi)
        return inside

    def _dist(self, pts):
        x = pts[:, 0]
        out = np.zeros(x.shape[0])
        for lo, hi in self.intervals:
            mask = (x > lo) & (x < hi)
            out[mask] = np.minimum(x[mask] - lo, hi - x[mask])
        return out

    def _nearest(self, point):
        x = float(point[0])
        for lo, hi in self.intervals:
            if lo < x < hi:
                return np.array([lo if x - lo <= hi - x else hi])
        ends = np.array([e for iv in self.intervals for e in iv])
        return np.array([ends[np.argmin(np.abs(ends - x))]])

    def bounding_box(self, window):
        return np.array([self.intervals[0][0]]), np.array([self.intervals[-1][1]])

    def anchor_point(self):
        lo, hi = max(self.intervals, key=lambda iv: iv[1] - iv[0])
        return np.array([0.5 * (lo + hi)])

    @property
    def inradius(self):
        return max(0.5 * (hi - lo) for lo, hi in self.intervals)

    def scaled(self, factor):
        return replace(self, intervals=tuple((factor * lo, factor * hi) for lo, hi in self.intervals),
                       r0=factor * self.r0)

    def describe(self):
        return 'intervals(' + ', '.join(f"{lo:g}:{hi:g}" for lo, hi in self.intervals) + ')'


@dataclass(frozen=True)
class BallComplement(Domain):
    """{x : |x - center| > radius}"""

    center: tuple = None
    radius: float = 1.0

    kind = 'complement-of-ball'

    def __post_init__(self):
        object.__setattr__(self, 'center', _vector(self.center, self.d, 'center'))
        if not self.radius > 0:
            raise ConfigError('radius', f"must be > 0, got {self.radius!r}")
        if math.isinf(self.r0):
            object.__setattr__(self, 'r0', float(self.radius))
        elif not 0 < self.r0 <= self.radius:
            raise ConfigError('r0', f"must lie in (0, {self.radius}], got {self.r0!r}")

    def _contains(self, pts):
        return np.linalg.norm(pts - np.asarray(self.center), axis=1) > self.radius

    def _dist(self, pts):
        return np.maximum(np.linalg.norm(pts - np.asarray(self.center), axis=1) - self.radius, 0.0)

    def _nearest(self, point):
        c = np.asarray(self.center)
        offset = point - c
        return c + self.radius * offset / np.linalg.norm(offset)

    def bounding_box(self, window):
        c = np.asarray(self.center)
        return c - self.radius - window, c + self.radius + window

    def scaled(self, factor):
        return replace(self, center=tuple(factor * v for v in self.center), radius=factor * self.radius,
                       r0=factor * self.r0)

    def describe(self):
        return f"complement-of-ball(radius={self.radius:g})"


_DOMAIN_PATTERN = re.compile(r'^\s*([a-z\-]+)\s*(?:\((.*)\))?\s*$')


def _parse_args(body):
    args = {}
    if not body or not body.strip():
        return args
    for item in body.split(','):
        item = item.strip()
        if not item:
            continue
        if '=' not in item:
            raise ConfigError('domain', f"expected key=value, got {item!r}")
        key, value = (s.strip() for s in item.split('=', 1))
        args[key] = value
    return args


def _float(args, key, default=None):
    if key not in args:
        if default is None:
            raise ConfigError('domain', f"missing {key}")
        return default
    try:
        return float(args.pop(key))
    except ValueError:
        raise ConfigError('domain', f"{key} must be a number")


def _center(args, d):
    if 'center' not in args:
        return None
    return [float(v) for v in args.pop('center').split(';')]


def parse_domain(text, d):
    """
    Build a Domain from its config description, e.g.

        ball(radius=1)            annulus(r_in=0.5, r_out=1, center=0;0)
        half-space(a=0, r0=1)     half-space-like(a=1, b=0, width=2)
        intervals(0:1, 2:3)       complement-of-ball(radius=1)
        full-space
    """
    match = _DOMAIN_PATTERN.match(text or '')
    if not match:
        raise ConfigError('domain', f"cannot parse {text!r}")
    kind, body = match.group(1), match.group(2)
    if kind in ('intervals', 'interval-union'):
        pieces = [p.strip() for p in (body or '').split(',') if p.strip()]
        try:
            ivs = tuple(tuple(float(v) for v in p.split(':')) for p in pieces)
        except ValueError:
            raise ConfigError('domain', f"intervals must look like lo:hi, got {body!r}")
        if any(len(iv) != 2 for iv in ivs):
            raise ConfigError('domain', f"intervals must look like lo:hi, got {body!r}")
        return IntervalUnion(d=d, intervals=ivs)
    args = _parse_args(body)
    r0 = _float(args, 'r0', math.inf)
    if kind == 'full-space':
        dom = FullSpace(d=d)
    elif kind == 'ball':
        dom = Ball(d=d, center=_center(args, d), radius=_float(args, 'radius', 1.0), r0=r0)
    elif kind == 'annulus':
        dom = Annulus(d=d, center=_center(args, d), r_in=_float(args, 'r_in'), r_out=_float(args, 'r_out'), r0=r0)
    elif kind == 'half-space':
        dom = HalfSpace(d=d, a=_float(args, 'a', 0.0), r0=r0)
    elif kind == 'half-space-like':
        dom = BumpHalfSpace(d=d, a=_float(args, 'a'), b=_float(args, 'b'), width=_float(args, 'width', 2.0), r0=r0)
    elif kind == 'complement-of-ball':
        dom = BallComplement(d=d, center=_center(args, d), radius=_float(args, 'radius', 1.0), r0=r0)
    else:
        raise ConfigError('domain', f"unknown kind {kind!r}")
    if args:
        raise ConfigError('domain', f"unknown arguments {sorted(args)} for {kind}")
    return dom
