"""Exception hierarchy shared across the package.

Validation errors (bad configuration, violated preconditions) map to CLI
exit code 2, numerical failures (divergence, non-convergence, degenerate
data) to exit code 3.
"""


class TransferSpecError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class ValidationError(TransferSpecError):
    """Invalid configuration, arguments, or file contents."""

    exit_code = 2


class ConfigError(ValidationError):
    """Run-configuration file is malformed or inconsistent."""


class RegimeError(ValidationError):
    """Operation called on the wrong side of the bifurcation."""


class NumericalError(TransferSpecError):
    """Data-dependent numerical failure."""

    exit_code = 3


class DivergenceError(NumericalError):
    """Trajectory left the blow-up radius; parameters or step size unstable."""


class ConvergenceError(NumericalError):
    """Iterative solver exhausted its budget without converging."""


class DegenerateVarianceError(NumericalError):
    """A coordinate has (near) zero variance and cannot be standardized."""


class EmptyDomainError(NumericalError):
    """No sample of the trajectory falls inside the partition domain."""


class LagTooLongError(NumericalError):
    """No admissible sample pair exists at the requested lag."""


class ZeroMassError(NumericalError):
    """Restricted density carries no mass."""


class EmptyPairingError(NumericalError):
    """No eigenvector pair exceeds the matching quality threshold."""


class NormalizationError(NumericalError):
    """Left/right eigenvector pair is numerically unnormalizable."""
