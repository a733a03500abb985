"""
relkernel - heat kernels, Green functions and Monte Carlo checks for
relativistic alpha-stable processes killed outside C^{1,1} open sets.
"""
from relkernel.config import Config, ModelParams, QuadratureConfig, MCConfig

__version__ = "0.3.0"

__all__ = ["Config", "ModelParams", "QuadratureConfig", "MCConfig", "__version__"]
