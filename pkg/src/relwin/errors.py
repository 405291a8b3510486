"""Exception types shared across the package."""


class RelwinError(Exception):
    """Base class for all package errors."""


class ValidationError(RelwinError):
    """Malformed inputs: bad shapes, out-of-range values, unreadable files."""


class GPFitError(RelwinError):
    """Gram matrix could not be factorized even after jitter."""


class InvariantError(RelwinError):
    """An internal consistency check failed (e.g. brute/fast disagreement)."""
