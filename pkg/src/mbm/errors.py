"""Exception hierarchy shared across the package."""


class MbmError(ValueError):
    """Base class for all errors raised by this package."""


class ConfigError(MbmError):
    """A dataset configuration file is malformed or inconsistent."""


class ValidationError(MbmError):
    """Data violates a structural or value-domain constraint."""


class BudgetError(MbmError):
    """An exhaustive computation would exceed its configuration-space budget."""
