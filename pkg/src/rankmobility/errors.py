"""Exception taxonomy shared across the package.

The split matters for the service layer and CLI: input and domain
problems map to client errors (HTTP 400, exit code 2), estimation
failures to server errors (HTTP 500, exit code 3).
"""


class MobilityError(Exception):
    """Base class for all errors raised by this package."""


class InputError(MobilityError):
    """Malformed or unusable input data (bad CSV, missing column, ...)."""


class DomainError(MobilityError, ValueError):
    """Parameter or evaluation point outside its valid domain."""


class EstimationError(MobilityError):
    """An estimation procedure could not produce a result."""


class UnfittedThresholdError(MobilityError, KeyError):
    """Lookup of a threshold that was never fitted, with on-demand fitting off."""
