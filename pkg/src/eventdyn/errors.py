"""Exception hierarchy. The CLI maps each class to a distinct exit code."""


class EventDynError(Exception):
    """Base class for all package errors."""


class ValidationError(EventDynError, ValueError):
    """Input failed validation (bad rows, unknown names, empty corpus)."""


class DegenerateDataError(EventDynError, ValueError):
    """A statistic is undefined for the given data, e.g. a constant vector."""
