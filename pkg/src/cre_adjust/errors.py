class InputError(ValueError):
    """Bad user input (non-finite data, inconsistent lengths, malformed files)."""


class UsageError(ValueError):
    """Caller asked for something the routine does not support."""


class ResourceError(RuntimeError):
    """Work would exceed a configured size cap."""


class DegenerateDesignError(ValueError):
    """No treated units, or some other assignment that makes an estimator undefined."""
