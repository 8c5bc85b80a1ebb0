"""Exception hierarchy shared across the package.

ValidationError covers malformed inputs and contract violations (CLI exit
code 2); NumericError covers failures of the numerical machinery itself
(CLI exit code 3).
"""


class SpcdistError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SpcdistError):
    """Input data or arguments violate a documented precondition."""


class NumericError(SpcdistError):
    """A numerical routine could not produce a trustworthy result."""
