"""Exception types raised by dispectral."""


class DispectralError(Exception):
    """Generic exception type for errors occurring in dispectral."""


class ValidationError(DispectralError, ValueError):
    """Exception: invalid input or violated precondition."""


class SchemaError(ValidationError):
    """Exception: a CSV file lacks the columns its consumer needs."""

    def __init__(self, message, kind=None, missing=()):
        super().__init__(message)
        self.kind = kind
        self.missing = tuple(missing)


class ConfigError(ValidationError):
    """Exception: a configuration file could not be interpreted."""


class UnsupportedModelError(DispectralError, NotImplementedError):
    """Exception: operation is only defined for a sub-family of models."""


class MissingDependencyError(DispectralError):
    """Exception: required dependency is missing."""


class NumericalError(DispectralError, ArithmeticError):
    """Exception: a numerical procedure failed."""


class ConvergenceError(NumericalError):
    """Exception: an iterative solver did not converge."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class DegeneracyError(NumericalError):
    """Exception: eigenvalues are not separated enough for the requested quantity."""


class DivergenceError(NumericalError):
    """Exception: a series was evaluated outside its disc of convergence."""


class ClusteringError(NumericalError):
    """Exception: every restart of a clustering fit collapsed."""


class PopulationOverflowError(NumericalError):
    """Exception: a branching process exceeded its population cap."""
