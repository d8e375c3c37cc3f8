"""Exception hierarchy shared by all modules."""


class PhononGateError(Exception):
    """Base class for every error raised by the package."""


class LayoutError(PhononGateError, ValueError):
    """Operator dimensions or factor labels do not match a layout."""


class ParameterError(PhononGateError, ValueError):
    """A physical parameter is outside its admissible range."""


class ModelError(PhononGateError, ValueError):
    """An operator or parameter set violates a modelling assumption."""


class DomainError(PhononGateError, ValueError):
    """A closed-form function was evaluated outside its domain."""


class IntegratorError(PhononGateError, RuntimeError):
    """Time-step control failed to converge."""


class TruncationError(PhononGateError, RuntimeError):
    """A truncated series or Fock expansion has not converged."""


class ConvergenceError(PhononGateError, RuntimeError):
    """A spectral series does not converge for the given parameters."""


class ConfigError(PhononGateError, ValueError):
    """A run or gate configuration is invalid."""
