"""Exception types shared across the package."""


class QsdlabError(Exception):
    """Base class for package errors."""


class ConfigurationError(QsdlabError):
    """Bad user-supplied parameter (grid size, truncation, config key, ...)."""


class UnsupportedDomainError(QsdlabError):
    """Operation not available on this domain kind."""


class ResolutionError(QsdlabError):
    """Requested truncation exceeds what the grid can resolve."""


class SurvivalError(QsdlabError):
    """Scaled survival probability is non-positive at the requested time."""


class TruncationError(QsdlabError):
    """Series truncation is provably insufficient for the requested output."""
