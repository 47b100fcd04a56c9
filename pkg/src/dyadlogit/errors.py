"""Exception hierarchy shared across the package."""

from __future__ import annotations


class DyadLogitError(Exception):
    """Base class for all package errors."""


class ConfigError(DyadLogitError):
    """A configuration is malformed: missing columns, bad transforms,
    inconsistent feature declarations, unreadable config files."""


class InputError(DyadLogitError):
    """Input data violates a precondition: wrong dimensions, non-numeric
    values fed to a numeric transform, weights that do not sum to one."""


class DataError(DyadLogitError):
    """A data file failed validation (parse errors, unknown ids,
    duplicate edges).  Messages carry file/line context."""


class SeparationError(DyadLogitError):
    """The outcome is all zeros or all ones, or the intercept diverged
    during optimization; the composite MLE does not exist."""


class SingularHessianError(DyadLogitError):
    """The Hessian (or its negative, the information proxy) is numerically
    singular, typically due to collinear features."""

    def __init__(self, message: str, suspect_features: list[str] | None = None):
        super().__init__(message)
        self.suspect_features = suspect_features or []


class NotConvergedError(DyadLogitError):
    """An operation that requires a converged fit received one that is not."""


class McRunError(DyadLogitError):
    """A Monte Carlo study failed its integrity requirements (for example
    more than 2% of replications did not converge)."""
