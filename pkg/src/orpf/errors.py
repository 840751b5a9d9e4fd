"""Exception hierarchy.

Two families matter to callers: validation problems with the input data
(CLI exit code 1) and numerical failures of a solver (CLI exit code 2).
"""


class OrpfError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(OrpfError, ValueError):
    """Input data is malformed or physically inconsistent."""


class DuplicateNodeError(ValidationError):
    pass


class DanglingEdgeError(ValidationError):
    pass


class DisconnectedGridError(ValidationError):
    pass


class MissingPCCError(ValidationError):
    pass


class SchemaError(ValidationError):
    """A network file does not follow the expected JSON layout."""


class ConfigurationError(ValidationError):
    """Bad simulation settings, e.g. invalid cluster probabilities."""


class NotATreeError(ValidationError):
    """An operation that needs a radial grid received a meshed one."""


class NumericalError(OrpfError, ArithmeticError):
    pass


class ConvergenceError(NumericalError):
    """Power flow fixed point did not converge within ``max_iter``."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class ZeroVoltageError(NumericalError):
    pass


class InternalInconsistencyError(NumericalError):
    """A linear system that should be regular turned out singular."""
