"""Exception hierarchy shared by all modules."""


class ElastomonoError(Exception):
    """Base class for all package errors."""


class DomainError(ElastomonoError, ValueError):
    """An argument lies outside the supported domain of an operation."""


class OverlapError(ElastomonoError, ValueError):
    """Two inclusions with contrast in the same parameter overlap."""


class ConfigError(ElastomonoError, ValueError):
    """Invalid experiment configuration."""


class GridMismatchError(ElastomonoError, ValueError):
    """Operators or densities defined on incompatible direction grids."""


class SolverError(ElastomonoError, RuntimeError):
    """A forward solve failed."""


class TransmissionEigenvalueError(SolverError):
    """Singular modal system in the disk series solver."""

    def __init__(self, mode, cond):
        super().__init__(
            f"modal system for angular mode {mode} is singular (condition number {cond:.3e})"
        )
        self.mode = mode
        self.cond = cond


class TruncationError(SolverError):
    """Series coefficients did not decay before the truncation order."""


class ConvergenceError(SolverError):
    """Iterative solve did not reach its tolerance within the iteration cap."""


class UnderResolvedError(SolverError, ValueError):
    """Cell size too coarse for the shortest wavelength in the medium."""
