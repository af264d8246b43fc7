"""Exception types shared across the package."""


class QnetError(Exception):
    """Base class for all qnet errors."""


class InvalidIndexError(QnetError):
    """A transverse mode index or eigenvalue index is out of range."""


class GeometryError(QnetError):
    """Inconsistent network geometry (bad attachment, overlap, ...)."""


class DegenerateFermiLevelError(QnetError):
    """The Fermi level coincides with a channel threshold."""


class BandEdgeError(QnetError):
    """Energy outside the validity range of a wavenumber matrix."""


class PoleProximityError(QnetError):
    """Evaluation requested too close to an eigenvalue pole."""


class SingularDenominatorError(QnetError):
    """A matrix that must be inverted is singular or too ill conditioned."""


class DispersionRootProximityError(SingularDenominatorError):
    """The closed-channel denominator is singular: lambda is an
    eigenvalue of the intermediate operator."""


class ThinNetworkError(QnetError):
    """The thin-network condition required by an elimination step fails."""


class RegimeError(QnetError):
    """An approximation was requested outside its regime of validity."""


class NoConvergenceError(QnetError):
    """An iterative solver failed to converge."""


class TieError(QnetError):
    """An ambiguous nearest-eigenvalue choice requires explicit input."""


class SolverError(QnetError):
    """A numerical backend (eigensolver, sparse solve) failed."""


class UnsupportedNetworkError(QnetError):
    """The network is valid but outside what the pipeline implements."""


class ConfigError(QnetError):
    """Invalid run configuration or config file."""

    def __init__(self, message, location=None):
        if location:
            message = f"{location}: {message}"
        super().__init__(message)
        self.location = location
