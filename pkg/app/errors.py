"""Exception hierarchy shared by the library, the problem-file loader and the CLI."""

from __future__ import annotations


class BvpError(Exception):
    """Root of every error raised on purpose by this package."""


class IntegrationFailure(BvpError):
    """The Cauchy integrator gave up (step size underflow, non-finite state)."""


class OrderUnavailable(BvpError):
    """A derivative order was requested that the data cannot supply."""


class DomainError(BvpError, ValueError):
    """An argument lies outside the set where the operation is defined."""


class ShapeMismatch(BvpError, ValueError):
    """Matrix or vector dimensions do not agree."""


class IllConditioned(BvpError):
    """A computation was too ill-conditioned to trust (e.g. clustered spectrum)."""


class NotApplicable(BvpError):
    """The requested experiment makes no sense for the given data."""


class ProblemFileError(BvpError, ValueError):
    """A problem or parameter file failed schema validation."""
