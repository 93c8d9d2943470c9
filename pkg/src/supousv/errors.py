"""Exception hierarchy shared by every module of the package."""


class SupOUSVError(Exception):
    """Base class for all errors raised by :mod:`supousv`."""


class DomainError(SupOUSVError, ValueError):
    """A parameter lies outside the domain where a quantity is finite."""


class ConfigError(SupOUSVError, ValueError):
    """Invalid or inconsistent configuration / parameter file."""


class DataError(SupOUSVError, ValueError):
    """Malformed or insufficient input data."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConvergenceError(SupOUSVError, RuntimeError):
    """An iterative computation did not reach its stopping criterion."""


class OptimizationError(SupOUSVError, RuntimeError):
    """A calibration failed; ``best`` holds the best candidate found."""

    def __init__(self, message, best=None, objective=None):
        super().__init__(message)
        self.best = best
        self.objective = objective
