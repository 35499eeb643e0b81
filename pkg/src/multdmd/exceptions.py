"""Exception types raised across the package."""


class MultDMDError(Exception):
    """Base class for all package errors."""


class ConfigError(MultDMDError, ValueError):
    """Invalid configuration or parameter value."""


class DomainError(MultDMDError, ValueError):
    """Argument outside the domain of an operation (shape, sign, range)."""


class InfeasibleError(DomainError):
    """The requested problem has no admissible solution, e.g. more clusters than points."""


class IntegrationDivergedError(MultDMDError, ArithmeticError):
    """A trajectory produced a non-finite state."""

    def __init__(self, trajectory, time):
        self.trajectory = trajectory
        self.time = time
        super().__init__(f"integration diverged on trajectory {trajectory} at t={time:g}")


class ParseError(MultDMDError, ValueError):
    """Malformed input file. ``lineno`` is 1-based."""

    def __init__(self, message, lineno=None, path=None):
        self.lineno = lineno
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if lineno is not None:
            where += f"{lineno}:"
        super().__init__(f"{where} {message}" if where else message)


class SingularGramError(MultDMDError, ArithmeticError):
    """A diagonal Gram entry is zero, i.e. some cell holds no data point."""


class UndefinedResidualError(MultDMDError, ArithmeticError):
    """The residual denominator vanishes."""


class DegenerateDataError(MultDMDError, ValueError):
    """Data carry no usable variance."""


class UnsupportedSamplingError(MultDMDError, ValueError):
    """The operation needs single-trajectory data."""


class SpectralError(MultDMDError, ArithmeticError):
    """The eigensolver did not converge."""


class ConditioningWarning(UserWarning):
    """An eigenvector basis is badly conditioned."""


class CellMergeWarning(UserWarning):
    """Empty Voronoi cells were merged into their neighbours."""
