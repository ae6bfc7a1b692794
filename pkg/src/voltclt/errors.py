"""Exception hierarchy shared by all modules.

Every error carries an optional ``data`` payload (fit tables, residuals,
probe values) so that callers and reports can show diagnostics.
"""


class VoltCLTError(Exception):
    """Base class. ``data`` holds diagnostic values."""

    def __init__(self, message, data=None):
        super().__init__(message)
        self.data = data if data is not None else {}


class DomainError(VoltCLTError, ValueError):
    """Argument outside the domain of the operation."""


class ConfigurationError(VoltCLTError, ValueError):
    """Invalid descriptor, scenario or experiment configuration."""


class IntegrationError(VoltCLTError, RuntimeError):
    """Quadrature did not reach the requested accuracy."""


class DegenerateKernelError(VoltCLTError, ValueError):
    """Kernel has zero L2 mass on the requested window."""


class NoLimitError(VoltCLTError, RuntimeError):
    """Numeric limit-kernel extraction did not converge."""


class AnalysisUnreliableError(VoltCLTError, RuntimeError):
    """Regression-based order estimate failed its quality gate."""


class IndeterminateError(VoltCLTError, RuntimeError):
    """Tail behaviour of a measure could not be classified."""


class ApproximationError(VoltCLTError, RuntimeError):
    """Quadrature lift error above the caller's threshold."""


class SimulationError(VoltCLTError, RuntimeError):
    """Monte Carlo run failed (too many non-finite paths, bad shapes)."""


class ConsistencyError(VoltCLTError, RuntimeError):
    """Two routes that must agree did not."""


class CovarianceError(VoltCLTError, RuntimeError):
    """Covariance matrix not positive semidefinite within tolerance."""


class RegimeError(VoltCLTError, RuntimeError):
    """Pricing regime could not be determined."""


class UsageError(ConfigurationError):
    """Operation called with an argument of the wrong kind."""
