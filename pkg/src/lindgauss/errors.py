"""Exception hierarchy for lindgauss."""


class LindgaussError(Exception):
    """Base class for all package errors."""


class DimensionError(LindgaussError):
    """Shapes or phase-space dimensions do not match."""


class InvalidCovarianceError(LindgaussError):
    """Covariance matrix violates symmetry/positivity/purity requirements."""


class DerivativeOrderError(LindgaussError):
    """A symbol was asked for derivatives beyond its available order."""


class MomentOrderError(LindgaussError):
    """Gaussian moment formula requested beyond the implemented order."""


class NtsConstraintError(LindgaussError):
    """The squeezing-ratio constraint of the covariance split is violated.

    Carries the offending particle index (or None for a single state) and
    the constraint margin that failed.
    """

    def __init__(self, message, particle=None, margin=None):
        super().__init__(message)
        self.particle = particle
        self.margin = margin


class NonPsdDiffusionError(LindgaussError):
    """Diffusive part of a covariance split is negative beyond round-off."""

    def __init__(self, message, particle=None, min_eig=None):
        super().__init__(message)
        self.particle = particle
        self.min_eig = min_eig


class GridError(LindgaussError):
    """Grid construction or pairing problem."""


class SolverError(LindgaussError):
    """A time integration failed (stability, trace drift, ...)."""


class ConfigError(LindgaussError):
    """Scenario/sweep configuration text is invalid."""
