"""Exception hierarchy shared by the numerical and Monte Carlo layers."""

from __future__ import annotations


class SkewlocError(Exception):
    """Base class for all package errors."""


class ConfigError(SkewlocError, ValueError):
    """Invalid parameters or configuration text."""


class NumericalError(SkewlocError, ArithmeticError):
    """A numerical procedure failed to meet its accuracy contract."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not converge.

    Attributes
    ----------
    residual : float
        Last error estimate returned by the integrator.
    where : str
        Human readable label of the failing integral.
    """

    def __init__(self, message: str, residual: float = float("nan"), where: str = ""):
        super().__init__(message)
        self.residual = residual
        self.where = where


class DivergenceError(NumericalError):
    """An improper integral or series appears to diverge."""

    def __init__(self, message: str, partial_sums=None):
        super().__init__(message)
        self.partial_sums = list(partial_sums) if partial_sums is not None else []


class SeriesError(NumericalError):
    """A semigroup series failed its decay sanity check."""

    def __init__(self, message: str, partial_sums=None, terms=None):
        super().__init__(message)
        self.partial_sums = list(partial_sums) if partial_sums is not None else []
        self.terms = list(terms) if terms is not None else []


class SamplerError(SkewlocError, RuntimeError):
    """A sampler exceeded its iteration safeguard."""


class ExperimentError(SkewlocError, RuntimeError):
    """A Monte Carlo experiment cannot produce a meaningful result."""
