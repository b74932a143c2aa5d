"""Exception types shared across the package."""


class TrustnbrError(Exception):
    """Base class for errors raised by this package."""


class DataError(TrustnbrError):
    """Input data violates a contract (missing file, non-binary label, bad cell, ...)."""


class ArtifactError(TrustnbrError):
    """A persisted artifact is missing, malformed, or fails an integrity check."""


class NoAlertsError(TrustnbrError):
    """The model produced no positive prediction on the production split."""
