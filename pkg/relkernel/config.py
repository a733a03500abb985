"""
Configuration Layer - System settings, constants and validated parameter types
"""
import math
import os
from dataclasses import dataclass, replace

from dotenv import load_dotenv

from relkernel.errors import ConfigError

load_dotenv()


class Config:
    """System configuration and constants"""

    # Runtime settings
    WORKERS = int(os.getenv('RELKERNEL_WORKERS', '1'))
    RESULTS_DIR = os.getenv('RELKERNEL_RESULTS_DIR', 'results')
    LOG_LEVEL = os.getenv('RELKERNEL_LOG_LEVEL', 'WARNING').upper()

    # Quadrature defaults
    REL_TOL = 1e-10
    ABS_TOL = 1e-14
    MAX_SUBDIVISIONS = 200

    # Monte Carlo defaults
    N_SAMPLES = 20000
    GRID_STEPS = 64
    N_STREAMS = 16

    # Verification thresholds
    HEAT_KERNEL_CAP = 200.0
    GREEN_CAP = 50.0
    FREE_KERNEL_CAP = 100.0
    GREEN_RATIO_CAP = 20.0
    MAX_REL_SE = 0.25
    C2_GRID = (0.25, 0.35, 0.5, 0.7, 1.0, 1.4, 2.0, 2.8, 4.0)

    # Output file names inside a run directory
    CSV_NAME = 'ratios.csv'
    JSON_NAME = 'report.json'
    SVG_NAME = 'ratios.svg'

    @classmethod
    def workers(cls):
        """Worker count, re-read so a changed environment takes effect"""
        raw = os.getenv('RELKERNEL_WORKERS', str(cls.WORKERS))
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError('RELKERNEL_WORKERS', f"expected a positive integer, got {raw!r}")
        if value < 1:
            raise ConfigError('RELKERNEL_WORKERS', f"expected a positive integer, got {value}")
        return value


@dataclass(frozen=True)
class ModelParams:
    """Dimension d, stability index alpha in (0, 2) and mass m >= 0"""

    d: int
    alpha: float
    m: float = 0.0

    def __post_init__(self):
        if isinstance(self.d, bool) or not isinstance(self.d, int) or self.d < 1:
            raise ConfigError('d', f"must be an integer >= 1, got {self.d!r}")
        alpha = float(self.alpha)
        if not (0.0 < alpha < 2.0):
            raise ConfigError('alpha', f"must lie in (0, 2), got {self.alpha!r}")
        m = float(self.m)
        if not math.isfinite(m) or m < 0.0:
            raise ConfigError('m', f"must be a finite number >= 0, got {self.m!r}")
        object.__setattr__(self, 'alpha', alpha)
        object.__setattr__(self, 'm', m)

    @property
    def m_root(self):
        """m^{1/alpha}, the inverse length scale of the tempering"""
        return self.m ** (1.0 / self.alpha) if self.m > 0 else 0.0

    @property
    def m_sq(self):
        """m^{2/alpha}, the exponential tilt of the subordinator"""
        return self.m ** (2.0 / self.alpha) if self.m > 0 else 0.0

    @property
    def beta(self):
        """Index alpha/2 of the subordinator"""
        return self.alpha / 2.0

    def with_mass(self, m):
        return replace(self, m=m)

    def to_dict(self):
        return {'d': self.d, 'alpha': self.alpha, 'm': self.m}


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = Config.REL_TOL
    abs_tol: float = Config.ABS_TOL
    max_subdivisions: int = Config.MAX_SUBDIVISIONS

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ConfigError('rel_tol', f"must be > 0, got {self.rel_tol!r}")
        if not self.abs_tol >= 0:
            raise ConfigError('abs_tol', f"must be >= 0, got {self.abs_tol!r}")
        if int(self.max_subdivisions) < 1:
            raise ConfigError('max_subdivisions', f"must be >= 1, got {self.max_subdivisions!r}")


DEFAULT_QUAD = QuadratureConfig()


@dataclass(frozen=True)
class MCConfig:
    """Monte Carlo settings; n_samples paths split over n_streams fixed batches"""

    n_samples: int = Config.N_SAMPLES
    grid_steps: int = Config.GRID_STEPS
    seed: int = 0
    n_streams: int = Config.N_STREAMS
    workers: int = 0
    time_horizon_cap: float = 0.0

    def __post_init__(self):
        if int(self.n_samples) < 1:
            raise ConfigError('n_samples', f"must be >= 1, got {self.n_samples!r}")
        if int(self.grid_steps) < 1:
            raise ConfigError('grid_steps', f"must be >= 1, got {self.grid_steps!r}")
        if int(self.n_streams) < 1:
            raise ConfigError('n_streams', f"must be >= 1, got {self.n_streams!r}")
        if int(self.n_streams) > int(self.n_samples):
            raise ConfigError('n_streams', "cannot exceed n_samples")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ConfigError('seed', f"must be a 64-bit unsigned integer, got {self.seed!r}")
        if self.time_horizon_cap < 0:
            raise ConfigError('time_horizon_cap', f"must be >= 0, got {self.time_horizon_cap!r}")

    def resolved_workers(self):
        return int(self.workers) if self.workers else Config.workers()

    def with_samples(self, n_samples):
        return replace(self, n_samples=n_samples, n_streams=min(self.n_streams, n_samples))

    def with_seed(self, seed):
        return replace(self, seed=seed)

    def stream_sizes(self):
        """Paths per stream; the first streams take the remainder"""
        base, extra = divmod(int(self.n_samples), int(self.n_streams))
        return [base + (1 if i < extra else 0) for i in range(int(self.n_streams))]

    def to_dict(self):
        return {
            'n_samples': int(self.n_samples),
            'grid_steps': int(self.grid_steps),
            'seed': int(self.seed),
            'n_streams': int(self.n_streams),
            'time_horizon_cap': float(self.time_horizon_cap),
        }
