"""Small-time central limit theory for stochastic Volterra equations.

Kernels and their order constants, Bernstein lifts, Volterra-Euler
simulation, Gaussian-limit goodness-of-fit tests, short-maturity variance
digitals and a scenario runner.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigurationError,
    CovarianceError,
    DomainError,
    RegimeError,
    SimulationError,
    UsageError,
    VoltCLTError,
)
from .kernels import (  # noqa: E402
    ExpSum,
    FromMeasure,
    Gamma,
    LogModulated,
    RiemannLiouville,
    Shifted,
    analyze_kernel,
    lambda_n,
    limit_kernel,
)
from .svie_sim import SimGrid, SVIEModel, euler_volterra, fft_convolution  # noqa: E402

__all__ = [
    "__version__",
    "ConfigurationError",
    "CovarianceError",
    "DomainError",
    "RegimeError",
    "SimulationError",
    "UsageError",
    "VoltCLTError",
    "ExpSum",
    "FromMeasure",
    "Gamma",
    "LogModulated",
    "RiemannLiouville",
    "Shifted",
    "analyze_kernel",
    "lambda_n",
    "limit_kernel",
    "SimGrid",
    "SVIEModel",
    "euler_volterra",
    "fft_convolution",
]
