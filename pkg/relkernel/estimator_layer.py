"""
Estimator Layer - Monte Carlo estimates of killed kernels, survival, Green functions and lambda_1

Paths are split into n_streams fixed batches, batch i drawing from
SeedSequence([seed, i]). Batches run on a thread pool and are reduced in
stream order, so a result depends on (seed, n_streams, n_samples) only.

The killed kernel uses final-step density averaging: with t_k = k dt,
p^m_D(t_k, x, y) is estimated by the mean over paths of
1{alive at t_{k-1}} p^m(dt, X_{t_{k-1}} - y). One simulation yields the
whole curve k = 1..n.

The Green function integrates the same estimator over a dyadic time grid
whose steps halve towards t = 0.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy import stats

from relkernel.config import DEFAULT_QUAD, MCConfig
from relkernel.errors import InsufficientDataError, NonIntegrableError, ParameterDomainError
from relkernel.kernel_layer import free_kernel, kernel_table
from relkernel.logging_config import get_logger
from relkernel.simulation_layer import RngStream, iterate_killed

logger = get_logger(__name__)

_GREEN_LEVELS = 8
_GREEN_MIN_STEPS = 16


def green_time_steps(cap, steps_per_block, levels=_GREEN_LEVELS):
    """
    Step sizes of the dyadic grid on [0, cap]: the block [0, cap 2^{-levels}] and
    the blocks [cap 2^{-j-1}, cap 2^{-j}], j = levels-1..0, each cut into
    steps_per_block equal steps.
    """
    cap, steps_per_block, levels = float(cap), int(steps_per_block), int(levels)
    if not cap > 0.0 or steps_per_block < 1 or levels < 0:
        raise ParameterDomainError("cap must be > 0, steps_per_block >= 1 and levels >= 0")
    widths = np.array([cap * 2.0 ** -levels] + [cap * 2.0 ** -(j + 1) for j in range(levels - 1, -1, -1)])
    return np.repeat(widths / steps_per_block, steps_per_block)


@dataclass(frozen=True)
class KernelEstimate:
    value: float
    std_err: float
    n_samples: int
    bandwidth: float
    grid_steps: int

    def __post_init__(self):
        if self.value < 0 or self.std_err < 0 or not self.bandwidth > 0:
            raise ParameterDomainError(f"invalid estimate {self!r}")

    @property
    def rel_se(self):
        return self.std_err / self.value if self.value > 0 else math.inf

    def to_dict(self):
        return {'value': self.value, 'std_err': self.std_err, 'n_samples': self.n_samples,
                'bandwidth': self.bandwidth, 'grid_steps': self.grid_steps}


@dataclass(frozen=True)
class GreenEstimate:
    value: float
    std_err: float
    n_samples: int
    bandwidth: float
    time_horizon_cap: float
    tail: float = 0.0

    def __post_init__(self):
        if self.value < 0 or self.std_err < 0 or not self.time_horizon_cap > 0:
            raise ParameterDomainError(f"invalid estimate {self!r}")

    @property
    def rel_se(self):
        return self.std_err / self.value if self.value > 0 else math.inf


@dataclass(frozen=True)
class EigenvalueEstimate:
    """lambda_1 with regression std_err; unpacks as (lambda1, std_err)"""

    lambda1: float
    std_err: float
    window: Tuple[float, float]
    n_points: int
    horizon: float

    def __iter__(self):
        return iter((self.lambda1, self.std_err))


@dataclass(frozen=True)
class SurvivalCurve:
    times: np.ndarray
    alive: np.ndarray = field(repr=False)
    n_samples: int = 0

    @property
    def values(self):
        return self.alive / self.n_samples

    @property
    def std_errs(self):
        p = self.values
        return np.sqrt(p * (1.0 - p) / self.n_samples)


def _batch_stats(sums, sq, counts):
    """Pooled mean and batch-means standard error (per-path SE for a single stream)"""
    sums, sq, counts = np.asarray(sums), np.asarray(sq), np.asarray(counts, dtype=float)
    n = counts.sum()
    mean = sums.sum(axis=0) / n
    if counts.size >= 2:
        batch_means = sums / counts.reshape((-1,) + (1,) * (sums.ndim - 1))
        weights = (counts / n).reshape((-1,) + (1,) * (sums.ndim - 1))
        var = (weights * (batch_means - mean) ** 2).sum(axis=0) * counts.size / (counts.size - 1)
        se = np.sqrt(var / counts.size)
    else:
        var = np.maximum(sq.sum(axis=0) / n - mean ** 2, 0.0)
        se = np.sqrt(var / max(n - 1.0, 1.0))
    return mean, se


class MonteCarloEstimator:
    """Estimators for one (params, mc) pair"""

    def __init__(self, params, mc=None, quad=DEFAULT_QUAD):
        self.params = params
        self.mc = mc or MCConfig()
        self.quad = quad

    def _map_streams(self, worker):
        sizes = self.mc.stream_sizes()
        jobs = list(enumerate(sizes))
        n_workers = min(self.mc.resolved_workers(), len(jobs))
        if n_workers <= 1:
            return [worker(i, n) for i, n in jobs]
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            return list(pool.map(lambda job: worker(*job), jobs))

    def _check_point(self, dom, point, name):
        point = np.asarray(point, dtype=float).reshape(self.params.d)
        if not dom.contains(point):
            raise ParameterDomainError(f"{name}={point.tolist()} is not in {dom.describe()}")
        return point

    def kernel_curve(self, dom, x, ys, dt, n_steps, antithetic=False):
        """
        Estimates of p^m_D(k dt, x, y) for k = 1..n_steps and every y in ys.

        Returns (values, std_errs, alive_counts) with values of shape (n_steps, n_y)
        and alive_counts[k] the paths alive at k dt, k = 0..n_steps - 1.
        """
        x = self._check_point(dom, x, 'x')
        ys = np.atleast_2d(np.asarray(ys, dtype=float))
        if ys.shape[1] != self.params.d:
            ys = ys.reshape(-1, self.params.d)
        for y in ys:
            self._check_point(dom, y, 'y')
        table = kernel_table(self.params, float(dt))
        params, seed = self.params, self.mc.seed

        def contributions(positions, alive):
            out = np.zeros((positions.shape[0], ys.shape[0]))
            idx = np.nonzero(alive)[0]
            if idx.size:
                gaps = np.linalg.norm(positions[idx, None, :] - ys[None, :, :], axis=2)
                out[idx] = table(gaps)
            return out

        def worker(stream_id, n_paths):
            rng = RngStream(seed, stream_id).generator()
            sums = np.zeros((n_steps, ys.shape[0]))
            sq = np.zeros_like(sums)
            alive_counts = np.zeros(n_steps)
            positions = np.tile(x, (n_paths, 1))
            alive = np.ones(n_paths, dtype=bool)
            c = contributions(positions, alive)
            sums[0], sq[0], alive_counts[0] = c.sum(axis=0), (c ** 2).sum(axis=0), n_paths
            for k, positions, alive in iterate_killed(dom, x, params, dt, n_steps - 1, n_paths, rng, antithetic):
                c = contributions(positions, alive)
                sums[k], sq[k], alive_counts[k] = c.sum(axis=0), (c ** 2).sum(axis=0), alive.sum()
            return sums, sq, n_paths, alive_counts

        results = self._map_streams(worker)
        sums = np.stack([r[0] for r in results])
        sq = np.stack([r[1] for r in results])
        counts = np.array([r[2] for r in results])
        mean, se = _batch_stats(sums, sq, counts)
        alive_counts = np.sum([r[3] for r in results], axis=0)
        return mean, se, alive_counts

    def killed_kernel(self, dom, t, x, y, antithetic=False):
        t = float(t)
        if not t > 0.0:
            raise ParameterDomainError(f"t must be > 0, got {t!r}")
        steps = int(self.mc.grid_steps)
        dt = t / steps
        mean, se, _ = self.kernel_curve(dom, x, [y], dt, steps, antithetic)
        return KernelEstimate(value=float(mean[-1, 0]), std_err=float(se[-1, 0]),
                              n_samples=int(self.mc.n_samples), bandwidth=dt, grid_steps=steps)

    def survival_curve(self, dom, x, horizon, n_grid):
        """Fraction of paths alive at each grid time k horizon / n_grid, k = 0..n_grid"""
        x = self._check_point(dom, x, 'x')
        dt = float(horizon) / int(n_grid)
        params, seed = self.params, self.mc.seed

        def worker(stream_id, n_paths):
            rng = RngStream(seed, stream_id).generator()
            counts = np.zeros(int(n_grid) + 1)
            counts[0] = n_paths
            for k, _, alive in iterate_killed(dom, x, params, dt, n_grid, n_paths, rng):
                counts[k] = alive.sum()
                if counts[k] == 0:
                    break
            return counts

        alive = np.sum(self._map_streams(worker), axis=0)
        times = np.linspace(0.0, float(horizon), int(n_grid) + 1)
        return SurvivalCurve(times=times, alive=alive, n_samples=int(self.mc.n_samples))

    def survival(self, dom, t, x):
        t = float(t)
        if not t > 0.0:
            raise ParameterDomainError(f"t must be > 0, got {t!r}")
        steps = int(self.mc.grid_steps)
        curve = self.survival_curve(dom, x, t, steps)
        p = float(curve.values[-1])
        return KernelEstimate(value=p, std_err=float(curve.std_errs[-1]), n_samples=curve.n_samples,
                              bandwidth=t / steps, grid_steps=steps)

    def _default_green_cap(self, dom, x, y):
        alpha = self.params.alpha
        if self.mc.time_horizon_cap > 0:
            return float(self.mc.time_horizon_cap)
        if dom.bounded:
            return 2.0 * dom.inradius ** alpha
        scale = float(np.linalg.norm(np.asarray(x) - np.asarray(y))) + float(dom.dist_to_complement(x)) \
            + float(dom.dist_to_complement(y))
        return 10.0 * scale ** alpha

    def green(self, dom, x, y):
        """
        G^m_D(x, y) = int_0^inf p^m_D(t, x, y) dt: trapezoid rule on a dyadic time grid
        up to the horizon cap, plus p(T) / lambda for bounded domains.
        """
        x_arr = np.asarray(x, dtype=float).reshape(self.params.d)
        y_arr = np.asarray(y, dtype=float).reshape(self.params.d)
        if np.array_equal(x_arr, y_arr):
            raise ParameterDomainError("the Green function is singular at x = y")
        if not dom.bounded and self.params.m == 0.0 and self.params.d <= 2:
            raise NonIntegrableError(f"G is infinite on the unbounded {dom.kind} domain for d <= 2, m = 0")
        cap = self._default_green_cap(dom, x_arr, y_arr)
        dts = green_time_steps(cap, max(int(self.mc.grid_steps), _GREEN_MIN_STEPS))
        return self._green_sum(dom, x_arr, y_arr, dts, cap)

    def _green_sum(self, dom, x, y, dts, cap):
        x = self._check_point(dom, x, 'x')
        y = self._check_point(dom, y, 'y')
        steps = dts.size
        tables = {dt: kernel_table(self.params, dt) for dt in map(float, np.unique(dts))}
        step_tables = [tables[float(dt)] for dt in dts]
        params, seed = self.params, self.mc.seed
        # trapezoid weights on t_1..t_n with p(0) = 0
        weights = 0.5 * (dts + np.append(dts[1:], 0.0))

        def worker(stream_id, n_paths):
            rng = RngStream(seed, stream_id).generator()
            per_path = step_tables[0](np.full(n_paths, np.linalg.norm(x - y))) * weights[0]
            last = np.zeros(n_paths)
            alive_counts = np.zeros(steps + 1)
            alive_counts[0] = n_paths
            for k, positions, alive in iterate_killed(dom, x, params, dts, steps, n_paths, rng):
                alive_counts[k] = alive.sum()
                if k == steps:
                    break
                idx = np.nonzero(alive)[0]
                if idx.size:
                    # alive at t_k and one step of length dts[k] estimates p_D(t_{k+1})
                    vals = step_tables[k](np.linalg.norm(positions[idx] - y, axis=1))
                    per_path[idx] += weights[k] * vals
                    if k == steps - 1:
                        last[idx] = vals
            return per_path, last, alive_counts

        results = self._map_streams(worker)
        alive_counts = np.sum([r[2] for r in results], axis=0)
        times = np.concatenate([[0.0], np.cumsum(dts)])
        tail_rate = None
        if dom.bounded:
            tail_rate = self._decay_rate(times, alive_counts, cap)
        sums, sq, counts = [], [], []
        for per_path, last, _ in results:
            total = per_path + (last / tail_rate if tail_rate else 0.0)
            sums.append(total.sum())
            sq.append((total ** 2).sum())
            counts.append(total.size)
        mean, se = _batch_stats(np.array(sums), np.array(sq), np.array(counts))
        tail = 0.0
        if tail_rate:
            tail = float(sum(r[1].sum() for r in results) / self.mc.n_samples / tail_rate)
        logger.debug("green estimate %.6g +- %.2g (tail %.3g, cap %.3g)", mean, se, tail, cap)
        return GreenEstimate(value=float(mean), std_err=float(se), n_samples=int(self.mc.n_samples),
                             bandwidth=float(dts[0]), time_horizon_cap=cap, tail=tail)

    @staticmethod
    def _decay_rate(times, alive_counts, cap, min_alive=20):
        """-slope of ln(alive) over [cap/3, cap]; None when too few survivors"""
        window = (times >= cap / 3.0) & (alive_counts >= min_alive)
        if window.sum() < 3:
            logger.warning("green tail skipped: fewer than 3 usable survival points in [%.3g, %.3g]", cap / 3, cap)
            return None
        fit = stats.linregress(times[window], np.log(alive_counts[window]))
        if not fit.slope < 0:
            return None
        return -fit.slope

    def lambda1(self, dom, max_doublings=6, min_alive=20):
        """
        -slope of ln S(t) on the window [T, 3T], T the first grid time with S <= 0.2,
        restricted to times with at least min_alive survivors.
        """
        if not dom.bounded:
            raise ParameterDomainError(f"lambda1 needs a bounded domain, got {dom.kind}")
        x0 = dom.anchor_point()
        scale = dom.inradius ** self.params.alpha
        horizon = float(self.mc.time_horizon_cap) or 6.0 * scale
        steps = int(self.mc.grid_steps)
        curve = self.survival_curve(dom, x0, horizon, steps)
        for _ in range(max_doublings):
            if curve.values[-1] <= 0.01:
                break
            horizon, steps = 2.0 * horizon, 2 * steps
            curve = self.survival_curve(dom, x0, horizon, steps)
        values, times = curve.values, curve.times
        below = np.nonzero(values <= 0.2)[0]
        if below.size == 0:
            raise InsufficientDataError(f"survival never fell below 0.2 before t={horizon:g}")
        t_start = times[below[0]]
        window = (times >= t_start) & (times <= 3.0 * t_start) & (curve.alive >= min_alive)
        if window.sum() < 3:
            raise InsufficientDataError(
                f"only {int(window.sum())} survival points with >= {min_alive} paths in [{t_start:g}, {3 * t_start:g}]")
        fit = stats.linregress(times[window], np.log(values[window]))
        if not fit.slope < 0:
            raise InsufficientDataError("survival did not decay over the fit window")
        logger.debug("lambda1 fit on [%.4g, %.4g] with %d points", t_start, 3 * t_start, int(window.sum()))
        return EigenvalueEstimate(lambda1=float(-fit.slope), std_err=float(fit.stderr),
                                  window=(float(t_start), float(3.0 * t_start)),
                                  n_points=int(window.sum()), horizon=float(horizon))


def estimate_killed_kernel(dom, t, x, y, params, mc_config, antithetic=False):
    return MonteCarloEstimator(params, mc_config).killed_kernel(dom, t, x, y, antithetic)


def estimate_survival(dom, t, x, params, mc_config):
    return MonteCarloEstimator(params, mc_config).survival(dom, t, x)


def estimate_green(dom, x, y, params, mc_config):
    return MonteCarloEstimator(params, mc_config).green(dom, x, y)


def estimate_lambda1(dom, params, mc_config):
    return MonteCarloEstimator(params, mc_config).lambda1(dom)


def free_kernel_reference(t, x, y, params):
    """Adaptive-quadrature p^m(t, x - y) for cross-checks of the full-space estimator"""
    return free_kernel(t, np.asarray(x, dtype=float) - np.asarray(y, dtype=float), params)
