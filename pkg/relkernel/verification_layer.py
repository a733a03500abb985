"""
Verification Layer - ratio sweeps of estimates against closed-form comparators

A sweep walks the (m, t) grid of one theorem tag, places stratified point
pairs in the domain, and records estimate / comparator for each pair. The
ratios of the retained points are fitted by a single band [1/C, C]; the
verdict is PASS when C stays under the tag's cap.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Tuple

import numpy as np

from relkernel.bounds_layer import (g_halfspace_d1, g_halfspace_d_ge_2, q_large_time, q_small_time,
                                    q_small_time_from_deltas, v_alpha, v_tilde)
from relkernel.config import Config, MCConfig, ModelParams
from relkernel.domain_layer import Ball, Domain
from relkernel.errors import ConfigError, EmptySweepError, IncompatibleSweepError
from relkernel.estimator_layer import MonteCarloEstimator
from relkernel.kernel_layer import free_kernel, free_kernel_comparator
from relkernel.logging_config import get_logger
from relkernel.simulation_layer import RngStream

logger = get_logger(__name__)

STRATA = ('interior', 'one-near', 'both-near')
_PAIR_STREAM = 1 << 20


@dataclass(frozen=True)
class RatioRecord:
    """One evaluated point; ratio is always estimate / comparator"""

    d: int
    alpha: float
    m: float
    t: Optional[float]
    x: tuple
    y: tuple
    comparator: float
    estimate: float
    std_err: float
    ratio: float
    stratum: str = ''
    delta_x: float = math.nan
    delta_y: float = math.nan

    @classmethod
    def build(cls, params, t, x, y, comparator, estimate, std_err, stratum='', delta_x=math.nan,
              delta_y=math.nan):
        comparator, estimate = float(comparator), float(estimate)
        ratio = estimate / comparator if comparator > 0 else math.inf
        return cls(d=params.d, alpha=params.alpha, m=params.m, t=None if t is None else float(t),
                   x=tuple(float(v) for v in np.ravel(x)), y=tuple(float(v) for v in np.ravel(y)),
                   comparator=comparator, estimate=estimate, std_err=float(std_err), ratio=ratio,
                   stratum=stratum, delta_x=float(delta_x), delta_y=float(delta_y))

    @property
    def distance(self):
        if not self.y:
            return math.nan
        return float(np.linalg.norm(np.subtract(self.x, self.y)))

    @property
    def rel_se(self):
        return self.std_err / self.estimate if self.estimate > 0 else math.inf

    def with_comparator(self, comparator):
        comparator = float(comparator)
        ratio = self.estimate / comparator if comparator > 0 else math.inf
        return replace(self, comparator=comparator, ratio=ratio)


@dataclass
class RatioReport:
    config: dict
    records: list
    summary: dict
    verdict: str
    dropped_points: int = 0
    reason: Optional[str] = None

    @property
    def passed(self):
        return self.verdict == 'pass'

    @classmethod
    def failed(cls, config, reason, dropped=0, records=None, fitted=None):
        records = list(records or [])
        summary = summarize(records, **(fitted or {}))
        return cls(config=config, records=records, summary=summary, verdict='fail',
                   dropped_points=int(dropped), reason=reason)

    def to_dict(self):
        return {
            'config': self.config,
            'summary': self.summary,
            'verdict': self.verdict,
            'dropped_points': self.dropped_points,
            'reason': self.reason,
        }


def summarize(records, C=None, c2_inner=None, gamma=None, lambda1=None):
    """min / max / geometric-mean ratio and log-spread, plus the fitted constants"""
    fitted = {'C': C, 'c2_inner': c2_inner, 'gamma': gamma, 'lambda1': lambda1}
    ratios = np.array([r.ratio for r in records], dtype=float)
    if ratios.size == 0:
        return {'min_ratio': None, 'max_ratio': None, 'geo_mean': None, 'log_spread': None, 'fitted': fitted}
    positive = ratios[(ratios > 0) & np.isfinite(ratios)]
    geo_mean = float(np.exp(np.log(positive).mean())) if positive.size == ratios.size else 0.0
    log_spread = float(np.log(positive.max()) - np.log(positive.min())) if positive.size else None
    return {
        'min_ratio': float(ratios.min()),
        'max_ratio': float(ratios.max()),
        'geo_mean': geo_mean,
        'log_spread': log_spread,
        'fitted': fitted,
    }


def fit_band(records, recompute=None, c2_grid=Config.C2_GRID, c2_default=1.0):
    """
    Smallest C >= 1 with every ratio in [1/C, C].

    With recompute(record, c2) -> comparator the inner constant is chosen from
    c2_grid (c2_default first, so ties keep it) to minimise max |log ratio|.
    """
    if not records:
        raise EmptySweepError(0)
    estimates = np.array([r.estimate for r in records], dtype=float)

    def spread(comparators):
        with np.errstate(divide='ignore', invalid='ignore'):
            logs = np.abs(np.log(estimates / np.asarray(comparators, dtype=float)))
        logs[np.isnan(logs)] = np.inf
        return float(logs.max())

    if recompute is None:
        return math.exp(spread([r.comparator for r in records])), float(c2_default)
    candidates = [float(c2_default)] + [float(c) for c in c2_grid if float(c) != float(c2_default)]
    best_spread, best_c2 = math.inf, float(c2_default)
    for c2 in candidates:
        s = spread([recompute(r, c2) for r in records])
        if s < best_spread:
            best_spread, best_c2 = s, c2
    logger.debug("fit_band chose c2_inner=%g with log-spread %.4g", best_c2, best_spread)
    return math.exp(best_spread), best_c2


class SweepCell:
    """One (m, t) cell of a sweep: the model, the estimators and the pair scale"""

    def __init__(self, index, dom, params, t, mc, lambda1=None):
        self.index = index
        self.dom = dom
        self.params = params
        self.t = t
        self.mc = mc
        self.lambda1 = lambda1
        self.estimator = MonteCarloEstimator(params, mc)
        self._massless = None
        self._green0 = {}

    @property
    def scale(self):
        if self.t is not None:
            return self.t ** (1.0 / self.params.alpha)
        if self.dom.bounded:
            return 0.5 * self.dom.inradius
        return 1.0 / self.params.m_root if self.params.m > 0 else 1.0

    def massless_green(self, x, y):
        key = (tuple(np.ravel(x)), tuple(np.ravel(y)))
        if key not in self._green0:
            if self._massless is None:
                self._massless = MonteCarloEstimator(self.params.with_mass(0.0), self.mc)
            self._green0[key] = self._massless.green(self.dom, x, y)
        return self._green0[key]


# comparators: (cell, t, x, y, c2) -> float

def _cmp_small_time(cell, t, x, y, c2):
    return q_small_time(t, x, y, cell.dom, cell.params, c2)


def _cmp_large_time(cell, t, x, y, c2):
    return q_large_time(t, x, y, cell.dom, cell.params, cell.lambda1)


def _cmp_v_alpha(cell, t, x, y, c2):
    return v_alpha(x, y, cell.dom, cell.params)


def _cmp_vtilde(cell, t, x, y, c2):
    return v_tilde(x, y, cell.dom, cell.params)


def _cmp_halfspace_d_ge_2(cell, t, x, y, c2):
    return g_halfspace_d_ge_2(x, y, cell.params)


def _cmp_halfspace_d1(cell, t, x, y, c2):
    return g_halfspace_d1(float(x[0]), float(y[0]), cell.params)


def _cmp_free_kernel(cell, t, x, y, c2):
    return free_kernel_comparator(t, float(np.linalg.norm(np.subtract(x, y))), cell.params)


def _cmp_massless_green(cell, t, x, y, c2):
    return cell.massless_green(x, y).value


# estimators: (cell, t, x, y) -> (value, std_err)

def _est_killed_kernel(cell, t, x, y):
    est = cell.estimator.killed_kernel(cell.dom, t, x, y)
    return est.value, est.std_err


def _est_green(cell, t, x, y):
    est = cell.estimator.green(cell.dom, x, y)
    return est.value, est.std_err


def _est_free_kernel(cell, t, x, y):
    return free_kernel(t, np.subtract(x, y), cell.params), 0.0


def _est_green_ratio(cell, t, x, y):
    massive = cell.estimator.green(cell.dom, x, y)
    massless = cell.massless_green(x, y)
    if not (massive.value > 0 and massless.value > 0):
        return massive.value, math.inf
    return massive.value, massive.value * math.hypot(massive.rel_se, massless.rel_se)


_BOUNDED = ('ball', 'annulus', 'interval-union')
_WITH_BOUNDARY = _BOUNDED + ('half-space', 'half-space-like', 'complement-of-ball')


@dataclass(frozen=True)
class TheoremTag:
    """One theorem check: its comparator, its estimator and the domains it applies to"""

    name: str
    comparator: Callable
    estimator: Callable
    kinds: Tuple[str, ...]
    timed: bool
    cap: float
    needs_mass: bool = False
    uses_c2: bool = False


THEOREM_TAGS = {tag.name: tag for tag in (
    TheoremTag('thm11_small_time', _cmp_small_time, _est_killed_kernel, _WITH_BOUNDARY, True,
               Config.HEAT_KERNEL_CAP, uses_c2=True),
    TheoremTag('thm11_large_time', _cmp_large_time, _est_killed_kernel, _BOUNDED, True, Config.HEAT_KERNEL_CAP),
    TheoremTag('v_alpha', _cmp_v_alpha, _est_green, _BOUNDED, False, Config.GREEN_CAP),
    TheoremTag('vtilde', _cmp_vtilde, _est_green, ('half-space', 'half-space-like'), False, Config.GREEN_CAP,
               needs_mass=True),
    TheoremTag('halfspace_d_ge_2', _cmp_halfspace_d_ge_2, _est_green, ('half-space',), False, Config.GREEN_CAP,
               needs_mass=True),
    TheoremTag('halfspace_d1', _cmp_halfspace_d1, _est_green, ('half-space',), False, Config.GREEN_CAP,
               needs_mass=True),
    TheoremTag('free_kernel', _cmp_free_kernel, _est_free_kernel, ('full-space',), True, Config.FREE_KERNEL_CAP),
    TheoremTag('green_ratio', _cmp_massless_green, _est_green_ratio, ('ball', 'annulus'), False,
               Config.GREEN_RATIO_CAP),
)}


def _floats(values, name):
    try:
        return tuple(float(v) for v in values)
    except (TypeError, ValueError):
        raise ConfigError(name, f"expected a list of numbers, got {values!r}")


@dataclass(frozen=True)
class SweepConfig:
    theorem_tag: str
    domain: Domain
    d: int
    alpha: float
    m_grid: tuple = (1.0,)
    t_grid: tuple = ()
    n_pairs: int = 12
    pairs: tuple = ()
    mc: MCConfig = field(default_factory=MCConfig)
    mass_bound: float = 1.0
    max_rel_se: float = Config.MAX_REL_SE
    cap: Optional[float] = None
    c2_inner: float = 1.0
    c2_grid: tuple = Config.C2_GRID
    fit_c2: bool = True
    self_test: bool = False

    def __post_init__(self):
        if self.theorem_tag not in THEOREM_TAGS:
            raise ConfigError('theorem', f"must be one of {sorted(THEOREM_TAGS)}, got {self.theorem_tag!r}")
        object.__setattr__(self, 'm_grid', _floats(self.m_grid, 'm_grid'))
        object.__setattr__(self, 't_grid', _floats(self.t_grid, 't_grid'))
        object.__setattr__(self, 'c2_grid', _floats(self.c2_grid, 'c2_grid'))
        object.__setattr__(self, 'pairs', tuple((tuple(np.ravel(np.asarray(x, dtype=float)).tolist()),
                                                 tuple(np.ravel(np.asarray(y, dtype=float)).tolist()))
                                                for x, y in self.pairs))
        ModelParams(self.d, self.alpha)
        if self.domain.d != self.d:
            raise ConfigError('domain', f"domain has dimension {self.domain.d}, model has {self.d}")
        if not self.m_grid:
            raise ConfigError('m_grid', "must not be empty")
        if not self.mass_bound > 0:
            raise ConfigError('mass_bound', f"must be > 0, got {self.mass_bound!r}")
        for m in self.m_grid:
            if not 0.0 <= m <= self.mass_bound:
                raise ConfigError('m_grid', f"masses must lie in [0, {self.mass_bound:g}], got {m!r}")
        if self.tag.timed and not self.t_grid:
            raise ConfigError('t_grid', f"{self.theorem_tag} needs a non-empty time grid")
        if any(not t > 0 for t in self.t_grid):
            raise ConfigError('t_grid', f"times must be > 0, got {list(self.t_grid)}")
        if not self.pairs and int(self.n_pairs) < 1:
            raise ConfigError('n_pairs', f"must be >= 1, got {self.n_pairs!r}")
        if not self.max_rel_se > 0:
            raise ConfigError('max_rel_se', f"must be > 0, got {self.max_rel_se!r}")
        if self.cap is not None and not self.cap >= 1.0:
            raise ConfigError('cap', f"must be >= 1, got {self.cap!r}")
        if not self.c2_inner > 0 or any(not c > 0 for c in self.c2_grid):
            raise ConfigError('c2_inner', "inner constants must be > 0")

    @property
    def tag(self):
        return THEOREM_TAGS[self.theorem_tag]

    @property
    def resolved_cap(self):
        return float(self.cap) if self.cap is not None else self.tag.cap

    def params(self, m):
        return ModelParams(self.d, self.alpha, m)

    def to_dict(self):
        return {
            'theorem_tag': self.theorem_tag,
            'domain': self.domain.to_dict(),
            'd': self.d,
            'alpha': float(self.alpha),
            'm_grid': list(self.m_grid),
            't_grid': list(self.t_grid) if self.tag.timed else [],
            'n_pairs': len(self.pairs) if self.pairs else int(self.n_pairs),
            'pairs': [[list(x), list(y)] for x, y in self.pairs],
            'mc': self.mc.to_dict(),
            'mass_bound': float(self.mass_bound),
            'max_rel_se': float(self.max_rel_se),
            'cap': self.resolved_cap,
            'c2_inner': float(self.c2_inner),
            'self_test': bool(self.self_test),
        }


def check_compatibility(config):
    """The tag of a sweep config, after checking it fits the domain and the masses"""
    tag = config.tag
    dom = config.domain
    if dom.kind not in tag.kinds:
        raise IncompatibleSweepError(f"{tag.name} needs a domain of kind {list(tag.kinds)}, got {dom.kind}")
    if tag.needs_mass and min(config.m_grid) <= 0.0:
        raise IncompatibleSweepError(f"{tag.name} is stated for m > 0 only")
    if tag.name.startswith('halfspace') and getattr(dom, 'a', 0.0) != 0.0:
        raise IncompatibleSweepError(f"{tag.name} uses the half-space {{x_d > 0}}, got {dom.describe()}")
    if tag.name == 'halfspace_d1' and config.d != 1:
        raise IncompatibleSweepError("halfspace_d1 is the d = 1 comparator")
    if tag.name == 'halfspace_d_ge_2' and config.d < 2:
        raise IncompatibleSweepError("halfspace_d_ge_2 needs d >= 2")
    return tag


def classify_pair(delta_x, delta_y, scale):
    near_x, near_y = delta_x <= scale / 4.0, delta_y <= scale / 4.0
    if near_x and near_y:
        return 'both-near'
    if near_x or near_y:
        return 'one-near'
    if delta_x >= scale and delta_y >= scale:
        return 'interior'
    return 'mixed'


def stratified_pairs(dom, scale, n_pairs, rng):
    """
    n_pairs (x, y, stratum) triples split over interior / one-near / both-near.

    Interior points have delta >= scale (capped below the inradius), near points
    delta in [scale/16, scale/4]. In the full space the pairs are (0, r e_1) on a
    geometric grid of r up to 20 scale, plus r = 0.
    """
    n_pairs = int(n_pairs)
    if dom.kind == 'full-space':
        radii = np.concatenate([[0.0], np.geomspace(0.05 * scale, 20.0 * scale, max(n_pairs - 1, 1))])[:n_pairs]
        origin = np.zeros(dom.d)
        return [(origin, r * np.eye(dom.d)[0], 'radial') for r in radii]
    top = 0.95 * dom.inradius if dom.bounded else 4.0 * scale
    reach = min(scale, top)
    deep = (min(scale, 0.5 * top), top)
    near = (reach / 16.0, reach / 4.0)
    window = 4.0 * scale
    counts = [n_pairs // 3 + (1 if i < n_pairs % 3 else 0) for i in range(3)]
    bands = {'interior': (deep, deep), 'one-near': (near, deep), 'both-near': (near, near)}
    pairs = []
    for stratum, count in zip(STRATA, counts):
        if not count:
            continue
        band_x, band_y = bands[stratum]
        xs = dom.sample_interior(rng, count, delta_range=band_x, window=window)
        ys = dom.sample_interior(rng, count, delta_range=band_y, window=window)
        pairs.extend((x, y, stratum) for x, y in zip(xs, ys))
    return pairs


def _cell_pairs(config, cell):
    if config.pairs:
        out = []
        for x, y in config.pairs:
            dx = float(config.domain.dist_to_complement(np.asarray(x)))
            dy = float(config.domain.dist_to_complement(np.asarray(y)))
            stratum = 'radial' if config.domain.kind == 'full-space' else classify_pair(dx, dy, cell.scale)
            out.append((np.asarray(x), np.asarray(y), stratum))
        return out
    rng = RngStream(config.mc.seed, _PAIR_STREAM + cell.index).generator()
    return stratified_pairs(config.domain, cell.scale, config.n_pairs, rng)


def _fit_lambdas(config, mc):
    out = {}
    for m in config.m_grid:
        est = MonteCarloEstimator(config.params(m), mc).lambda1(config.domain)
        logger.debug("lambda1(m=%g) = %.5g +- %.2g", m, est.lambda1, est.std_err)
        out[m] = est.lambda1
    return out


def _run_cell(cell, config, tag, estimator):
    kept, dropped = [], 0
    for x, y, stratum in _cell_pairs(config, cell):
        comparator = tag.comparator(cell, cell.t, x, y, config.c2_inner)
        value, std_err = estimator(cell, cell.t, x, y)
        record = RatioRecord.build(cell.params, cell.t, x, y, comparator, value, std_err, stratum,
                                   config.domain.dist_to_complement(x), config.domain.dist_to_complement(y))
        if not record.estimate > 0 or record.rel_se > config.max_rel_se:
            dropped += 1
            continue
        kept.append(record)
    return kept, dropped


def _small_time_recompute(record, c2):
    params = ModelParams(record.d, record.alpha, record.m)
    return q_small_time_from_deltas(record.t, record.distance, record.delta_x, record.delta_y, params, c2)


def run_sweep(config, estimator=None):
    """
    Evaluate comparator and estimate over every (m, t, pair) of the sweep.

    estimator(cell, t, x, y) -> (value, std_err) replaces the tag's estimator;
    config.self_test uses the comparator itself.
    """
    tag = check_compatibility(config)
    if config.self_test:
        def estimator(cell, t, x, y):
            return tag.comparator(cell, t, x, y, config.c2_inner), 0.0
    estimator = estimator or tag.estimator
    times = config.t_grid if tag.timed else (None,)
    grid = [(m, t) for m in config.m_grid for t in times]
    workers = min(Config.workers(), len(grid))
    mc = replace(config.mc, workers=1) if workers > 1 else config.mc
    lambdas = _fit_lambdas(config, mc) if tag.name == 'thm11_large_time' else {}
    cells = [SweepCell(i, config.domain, config.params(m), t, mc, lambdas.get(m))
             for i, (m, t) in enumerate(grid)]

    def run(cell):
        return _run_cell(cell, config, tag, estimator)

    if workers <= 1:
        results = [run(cell) for cell in cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, cells))
    records = [rec for kept, _ in results for rec in kept]
    dropped = sum(n for _, n in results)
    if dropped:
        logger.warning("%s: %d of %d points dropped by the SE filter (rel SE > %g)", tag.name, dropped,
                       dropped + len(records), config.max_rel_se)
    if not records:
        raise EmptySweepError(dropped)

    c2_inner = None
    if tag.uses_c2 and config.fit_c2:
        C, c2_inner = fit_band(records, _small_time_recompute, config.c2_grid, config.c2_inner)
        records = [rec.with_comparator(_small_time_recompute(rec, c2_inner)) for rec in records]
    else:
        C, _ = fit_band(records)
        if tag.uses_c2:
            c2_inner = float(config.c2_inner)
    lambda1 = None
    if lambdas:
        lambda1 = lambdas[config.m_grid[0]] if len(lambdas) == 1 else {repr(m): v for m, v in lambdas.items()}
    verdict = 'pass' if C <= config.resolved_cap else 'fail'
    reason = None if verdict == 'pass' else f"fitted C={C:.4g} exceeds the cap {config.resolved_cap:g}"
    return RatioReport(config=config.to_dict(), records=records,
                       summary=summarize(records, C=C, c2_inner=c2_inner, lambda1=lambda1),
                       verdict=verdict, dropped_points=dropped, reason=reason)


def per_mass_bands(records):
    """Fitted C of the records of each mass, keyed by m"""
    by_mass = {}
    for rec in records:
        by_mass.setdefault(rec.m, []).append(rec)
    return {m: fit_band(recs)[0] for m, recs in sorted(by_mass.items())}


@dataclass(frozen=True)
class ExitCheckConfig:
    """Grid for the check P(tau_{B(x, A r)} < gamma r^alpha) <= B over m <= M, r <= R"""

    d: int
    alpha: float
    m_grid: tuple = (0.1, 1.0)
    r_grid: tuple = (0.25, 1.0)
    a_factor: float = 1.0
    target: float = 0.25
    mass_bound: float = 1.0
    radius_bound: float = 1.0
    mc: MCConfig = field(default_factory=MCConfig)
    gamma_floor: float = 1e-4
    gamma_ceiling: float = 0.5
    n_bisect: int = 40

    def __post_init__(self):
        object.__setattr__(self, 'm_grid', _floats(self.m_grid, 'm_grid'))
        object.__setattr__(self, 'r_grid', _floats(self.r_grid, 'r_grid'))
        ModelParams(self.d, self.alpha)
        if not self.m_grid or not self.r_grid:
            raise ConfigError('m_grid', "mass and radius grids must not be empty")
        if any(not 0.0 <= m <= self.mass_bound for m in self.m_grid):
            raise ConfigError('m_grid', f"masses must lie in [0, {self.mass_bound:g}]")
        if any(not 0.0 < r <= self.radius_bound for r in self.r_grid):
            raise ConfigError('r_grid', f"radii must lie in (0, {self.radius_bound:g}]")
        if not self.a_factor > 0:
            raise ConfigError('a_factor', f"must be > 0, got {self.a_factor!r}")
        if not 0.0 < self.target < 1.0:
            raise ConfigError('target', f"must lie in (0, 1), got {self.target!r}")
        if not 0.0 < self.gamma_floor < self.gamma_ceiling:
            raise ConfigError('gamma_floor', "need 0 < gamma_floor < gamma_ceiling")

    def to_dict(self):
        return {
            'check': 'exit_time',
            'd': self.d,
            'alpha': float(self.alpha),
            'm_grid': list(self.m_grid),
            'r_grid': list(self.r_grid),
            'a_factor': float(self.a_factor),
            'target': float(self.target),
            'mass_bound': float(self.mass_bound),
            'radius_bound': float(self.radius_bound),
            'mc': self.mc.to_dict(),
            'gamma_floor': float(self.gamma_floor),
            'gamma_ceiling': float(self.gamma_ceiling),
        }


def run_exit_time_check(config):
    """
    Largest gamma in [gamma_floor, gamma_ceiling] with P(tau < gamma r^alpha) <= B + 2 SE
    on every (m, r) cell, found by bisection on the grid exit-time distribution.
    """
    n_grid = max(int(config.mc.grid_steps), 256)
    center = np.zeros(config.d)
    cells = []
    for m in config.m_grid:
        params = ModelParams(config.d, config.alpha, m)
        estimator = MonteCarloEstimator(params, config.mc)
        for r in config.r_grid:
            dom = Ball(d=config.d, radius=config.a_factor * r)
            curve = estimator.survival_curve(dom, center, config.gamma_ceiling * r ** config.alpha, n_grid)
            cells.append((params, r, 1.0 - curve.values, curve.std_errs))

    def probability(cell, gamma):
        _, _, exit_cdf, se = cell
        k = min(int(math.floor(gamma / config.gamma_ceiling * n_grid + 1e-9)), n_grid)
        return float(exit_cdf[k]), float(se[k])

    def admissible(gamma):
        return all(p <= config.target + 2.0 * s for p, s in (probability(c, gamma) for c in cells))

    def records_at(gamma):
        out = []
        for cell in cells:
            params, r, _, _ = cell
            p, s = probability(cell, gamma)
            out.append(RatioRecord.build(params, gamma * r ** config.alpha, center, (), config.target, p, s,
                                         stratum=f"r={r:g}"))
        return out

    if not admissible(config.gamma_floor):
        logger.warning("exit check: P(tau < gamma r^alpha) exceeds %g already at gamma=%g",
                       config.target, config.gamma_floor)
        return RatioReport.failed(config.to_dict(), f"no gamma above {config.gamma_floor:g} reaches B={config.target:g}",
                                  records=records_at(config.gamma_floor))
    if admissible(config.gamma_ceiling):
        gamma = config.gamma_ceiling
    else:
        lo, hi = config.gamma_floor, config.gamma_ceiling
        for _ in range(int(config.n_bisect)):
            mid = 0.5 * (lo + hi)
            if admissible(mid):
                lo = mid
            else:
                hi = mid
        gamma = lo
    records = records_at(gamma)
    logger.debug("exit check: gamma=%.5g over %d cells", gamma, len(cells))
    return RatioReport(config=config.to_dict(), records=records, summary=summarize(records, gamma=gamma),
                       verdict='pass')
