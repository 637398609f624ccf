"""Exception types shared across the package."""


class VarStokesError(Exception):
    """Base class for all package errors."""


class ConfigError(VarStokesError):
    """Invalid geometry, viscosity or run configuration."""


class AssemblyError(VarStokesError):
    """A bilinear form could not be assembled (e.g. coefficient bound violated)."""


class SolverError(VarStokesError):
    """An iterative or direct solve failed; carries diagnostics when available.

    Attributes
    ----------
    diagnostics : dict
        Best iterate, residual history, inf-sup hints; may be empty.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class PreconditionError(VarStokesError):
    """An operation was called with data violating its stated precondition."""


class AccuracyError(VarStokesError):
    """A quadrature result would be unreliable (e.g. probe too close to the surface)."""
