"""
Simulation Layer - paths of the relativistic stable process X^m

Two independent constructions:
- subordination: W = sqrt(2 S) N(0, I) with S the exponentially tilted
  alpha/2-stable subordinator (exact per grid step);
- thinning: a symmetric stable path (Gaussian small-jump part plus
  compound-Poisson large jumps) whose large jumps are deleted with
  probability 1 - psi(m^{1/alpha} rho).

The Gaussian part has the covariance of the jumps of X^m below the cut, so
removed small jumps enter through their second moment only; their expected
count, horizon * int_{|z| <= cut} J_m, is reported as sub_cut_mass.
Subtracting independently drawn large jumps from a full stable increment
would add their variance instead of removing it.

Killed paths are grid-detected: a path dies at the first grid time outside D.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from relkernel.config import DEFAULT_QUAD
from relkernel.errors import ParameterDomainError
from relkernel.levy_layer import sub_cut_deletion_mass, thinning_probability
from relkernel.logging_config import get_logger
from relkernel.special_layer import adaptive_quad, psi_closed_form, sphere_area, stable_constant

logger = get_logger(__name__)

_MAX_TILT_ROUNDS = 10000


@dataclass(frozen=True)
class RngStream:
    """Reproducible generator for one work unit: SeedSequence([seed, stream_id])"""

    seed: int
    stream_id: int = 0

    def generator(self):
        return np.random.default_rng(np.random.SeedSequence([int(self.seed), int(self.stream_id)]))


def _rng(rng):
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng


@dataclass
class PathSample:
    """One grid path; alive[k] is False from the first grid time outside D onwards"""

    times: np.ndarray
    positions: np.ndarray
    alive: np.ndarray
    exit_index: Optional[int] = None
    deleted_jumps: int = 0
    # expected number of removed jumps below the cut, carried by the Gaussian part
    sub_cut_mass: float = 0.0

    def __post_init__(self):
        if self.times.ndim != 1 or self.times[0] != 0.0 or np.any(np.diff(self.times) <= 0):
            raise ParameterDomainError("path times must start at 0 and increase strictly")

    @property
    def endpoint(self):
        return self.positions[-1]

    @property
    def killed(self):
        return self.exit_index is not None


def sample_positive_stable(beta, size, rng):
    """
    One-sided stable variates with Laplace transform exp(-lambda^beta), 0 < beta < 1
    (Kanter / Chambers-Mallows-Stuck representation).
    """
    if not 0.0 < beta < 1.0:
        raise ParameterDomainError(f"beta must lie in (0, 1), got {beta!r}")
    rng = _rng(rng)
    u = rng.uniform(0.0, math.pi, size)
    e = rng.standard_exponential(size)
    with np.errstate(divide='ignore', over='ignore'):
        value = np.sin(beta * u) / np.sin(u) ** (1.0 / beta) * (np.sin((1.0 - beta) * u) / e) ** ((1.0 - beta) / beta)
    # u at the ends of (0, pi) has probability zero; guard the measure-zero underflows
    return np.where(np.isfinite(value) & (value > 0.0), value, np.finfo(float).tiny)


def sample_subordinator_increment(dt, params, rng, size=None, return_attempts=False):
    """
    S with E[exp(-lambda S)] = exp(-dt ((lambda + m^{2/alpha})^{alpha/2} - m)).

    Raw alpha/2-stable increments are accepted with probability
    exp(-m^{2/alpha} S); rejected draws are repeated (mean e^{m dt} rounds).
    """
    dt = float(dt)
    if not dt > 0.0:
        raise ParameterDomainError(f"dt must be > 0, got {dt!r}")
    rng = _rng(rng)
    n = 1 if size is None else int(size)
    beta = params.beta
    scale = dt ** (1.0 / beta)
    out = np.empty(n)
    pending = np.arange(n)
    attempts = 0
    for _ in range(_MAX_TILT_ROUNDS):
        raw = scale * sample_positive_stable(beta, pending.size, rng)
        attempts += pending.size
        if params.m == 0.0:
            accept = np.ones(pending.size, dtype=bool)
        else:
            accept = rng.uniform(size=pending.size) < np.exp(-params.m_sq * raw)
        out[pending[accept]] = raw[accept]
        pending = pending[~accept]
        if pending.size == 0:
            break
    else:
        raise RuntimeError(f"tilted subordinator did not accept after {_MAX_TILT_ROUNDS} rounds")
    result = float(out[0]) if size is None else out
    return (result, attempts) if return_attempts else result


def sample_increment(dt, params, rng, size=None, antithetic=False):
    """W = sqrt(2 S) Z with Z standard normal in R^d; shape (d,) or (size, d)"""
    rng = _rng(rng)
    n = 1 if size is None else int(size)
    s = sample_subordinator_increment(dt, params, rng, size=n)
    if antithetic:
        half = (n + 1) // 2
        z_half = rng.standard_normal((half, params.d))
        z = np.concatenate([z_half, -z_half])[:n]
    else:
        z = rng.standard_normal((n, params.d))
    w = np.sqrt(2.0 * s)[:, None] * z
    return w[0] if size is None else w


def small_jump_variance(jump_cut, params, quad=DEFAULT_QUAD):
    """
    Per-coordinate variance rate of the jumps of X^m below jump_cut:
    (1/d) |S^{d-1}| A int_0^cut r^{1-alpha} psi(m^{1/alpha} r) dr
    """
    alpha = params.alpha
    lead = sphere_area(params.d) * stable_constant(params) / params.d
    if params.m == 0.0:
        return lead * jump_cut ** (2.0 - alpha) / (2.0 - alpha)

    def integrand(r):
        return r ** (1.0 - alpha) * float(psi_closed_form(params.m_root * r, params))

    value, _ = adaptive_quad(integrand, 0.0, jump_cut, quad, epsabs=0.0)
    return lead * value


def _uniform_directions(rng, n, d):
    if d == 1:
        return rng.choice(np.array([-1.0, 1.0]), size=(n, 1))
    g = rng.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def thinned_increments(dt, params, jump_cut, rng, n_paths, quad=DEFAULT_QUAD):
    """
    One grid step of the thinned construction for n_paths independent paths.

    Returns (increments of shape (n_paths, d), number of deleted jumps).
    """
    rng = _rng(rng)
    d, alpha = params.d, params.alpha
    rate = sphere_area(d) * stable_constant(params) * jump_cut ** (-alpha) / alpha
    sigma = math.sqrt(dt * small_jump_variance(jump_cut, params, quad))
    inc = sigma * rng.standard_normal((n_paths, d))
    counts = rng.poisson(rate * dt, size=n_paths)
    total = int(counts.sum())
    deleted = 0
    if total:
        owners = np.repeat(np.arange(n_paths), counts)
        sizes = jump_cut * rng.uniform(size=total) ** (-1.0 / alpha)
        jumps = sizes[:, None] * _uniform_directions(rng, total, d)
        keep_prob = thinning_probability(sizes, params) if params.m > 0.0 else np.ones(total)
        keep = rng.uniform(size=total) < keep_prob
        deleted = int(total - keep.sum())
        np.add.at(inc, owners[keep], jumps[keep])
    return inc, deleted


def sample_path_thinned(horizon, n_grid, params, jump_cut, rng, start=None, quad=DEFAULT_QUAD):
    """
    Stable path with large jumps thinned by psi(m^{1/alpha} rho).

    Below jump_cut the jumps of X^m are replaced by a Gaussian with matching
    covariance; m = 0 returns the plain stable path from subordination.
    """
    horizon, n_grid = float(horizon), int(n_grid)
    if not horizon > 0.0 or n_grid < 1:
        raise ParameterDomainError("horizon must be > 0 and n_grid >= 1")
    if not jump_cut > 0.0:
        raise ParameterDomainError(f"jump_cut must be > 0, got {jump_cut!r}")
    rng = _rng(rng)
    d = params.d
    dt = horizon / n_grid
    times = np.linspace(0.0, horizon, n_grid + 1)
    positions = np.zeros((n_grid + 1, d))
    if start is not None:
        positions[0] = np.asarray(start, dtype=float).reshape(d)
    deleted = 0
    if params.m == 0.0:
        steps = sample_increment(dt, params, rng, size=n_grid)
    else:
        steps = np.empty((n_grid, d))
        for k in range(n_grid):
            inc, removed = thinned_increments(dt, params, jump_cut, rng, 1, quad)
            steps[k] = inc[0]
            deleted += removed
    positions[1:] = positions[0] + np.cumsum(steps, axis=0)
    sub_cut = horizon * sub_cut_deletion_mass(jump_cut, params, quad) if params.m > 0.0 else 0.0
    return PathSample(times=times, positions=positions, alive=np.ones(n_grid + 1, dtype=bool),
                      deleted_jumps=deleted, sub_cut_mass=sub_cut)


def thinned_endpoints(horizon, n_grid, params, jump_cut, rng, n_paths, quad=DEFAULT_QUAD):
    """
    Endpoints of n_paths thinned paths started at 0, the total number of deleted
    jumps and the expected number of removed sub-cut jumps over all paths.
    """
    rng = _rng(rng)
    dt = float(horizon) / int(n_grid)
    position = np.zeros((n_paths, params.d))
    deleted = 0
    for _ in range(int(n_grid)):
        if params.m == 0.0:
            position += sample_increment(dt, params, rng, size=n_paths)
        else:
            inc, removed = thinned_increments(dt, params, jump_cut, rng, n_paths, quad)
            position += inc
            deleted += removed
    sub_cut = 0.0
    if params.m > 0.0:
        sub_cut = n_paths * float(horizon) * sub_cut_deletion_mass(jump_cut, params, quad)
    return position, deleted, sub_cut


def sample_killed_path(dom, horizon, n_grid, start, params, rng):
    """Grid path from subordination increments, killed at the first grid time outside dom"""
    horizon, n_grid = float(horizon), int(n_grid)
    if not horizon > 0.0 or n_grid < 1:
        raise ParameterDomainError("horizon must be > 0 and n_grid >= 1")
    start = np.asarray(start, dtype=float).reshape(params.d)
    if not dom.contains(start):
        raise ParameterDomainError(f"start {start.tolist()} is not in {dom.describe()}")
    rng = _rng(rng)
    dt = horizon / n_grid
    steps = sample_increment(dt, params, rng, size=n_grid)
    positions = np.empty((n_grid + 1, params.d))
    positions[0] = start
    positions[1:] = start + np.cumsum(steps, axis=0)
    inside = np.asarray(dom.contains(positions), dtype=bool)
    outside = np.nonzero(~inside)[0]
    alive = np.ones(n_grid + 1, dtype=bool)
    exit_index = None
    if outside.size:
        exit_index = int(outside[0])
        alive[exit_index:] = False
    return PathSample(times=np.linspace(0.0, horizon, n_grid + 1), positions=positions,
                      alive=alive, exit_index=exit_index)


@dataclass
class KilledBatch:
    """Vectorised killed paths: final positions, alive flags, grid exit times and survival curve"""

    times: np.ndarray
    positions: np.ndarray
    alive: np.ndarray
    exit_times: np.ndarray
    survival: np.ndarray = field(repr=False)


def iterate_killed(dom, start, params, dt, n_steps, n_paths, rng, antithetic=False):
    """
    Advance n_paths killed paths from start over n_steps grid steps of size dt
    (a scalar, or one size per step).

    Yields (k, positions, alive) after each step k = 1..n_steps; dead paths
    keep their exit position and are no longer advanced.
    """
    rng = _rng(rng)
    start = np.asarray(start, dtype=float).reshape(params.d)
    if not dom.contains(start):
        raise ParameterDomainError(f"start {start.tolist()} is not in {dom.describe()}")
    positions = np.tile(start, (int(n_paths), 1))
    alive = np.ones(int(n_paths), dtype=bool)
    dts = np.broadcast_to(np.asarray(dt, dtype=float), (int(n_steps),))
    for k in range(1, int(n_steps) + 1):
        idx = np.nonzero(alive)[0]
        if idx.size:
            positions[idx] += sample_increment(dts[k - 1], params, rng, size=idx.size, antithetic=antithetic)
            alive[idx] = np.asarray(dom.contains(positions[idx]), dtype=bool).reshape(-1)
        yield k, positions, alive


def simulate_killed_batch(dom, start, params, horizon, n_grid, n_paths, rng, antithetic=False):
    """Run iterate_killed to the horizon and collect exit times and the survival curve"""
    dt = float(horizon) / int(n_grid)
    times = np.linspace(0.0, float(horizon), int(n_grid) + 1)
    exit_times = np.full(int(n_paths), np.inf)
    survival = np.ones(int(n_grid) + 1)
    positions = alive = None
    for k, positions, alive in iterate_killed(dom, start, params, dt, n_grid, n_paths, rng, antithetic):
        newly = ~alive & np.isinf(exit_times)
        exit_times[newly] = times[k]
        survival[k] = alive.mean()
    return KilledBatch(times=times, positions=positions.copy(), alive=alive.copy(),
                       exit_times=exit_times, survival=survival)
