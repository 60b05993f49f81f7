"""Exception types shared across the pipeline stages."""


class StorageBenchError(Exception):
    """Base class for all errors raised by this package."""


class InvalidGeometryError(StorageBenchError, ValueError):
    """A region does not satisfy the geometric invariants (too few vertices, zero area, inverted box)."""


class DegenerateResultError(StorageBenchError, ValueError):
    """An operation produced a region that no longer satisfies the invariants."""


class UndefinedDirectionError(StorageBenchError, ValueError):
    """Direction requested between two identical points."""


class EmptySceneError(StorageBenchError, ValueError):
    """A scene or description list had no containers where at least one is required."""


class UnresolvedLabelError(StorageBenchError, ValueError):
    """A container reached verbalization without a concrete label."""


class SchemaError(StorageBenchError, ValueError):
    """An input file does not match its documented schema. Carries field/line context."""

    def __init__(self, message, field=None, line=None):
        detail = message
        if field is not None:
            detail += f" (field: {field})"
        if line is not None:
            detail += f" (line: {line})"
        super().__init__(detail)
        self.field = field
        self.line = line


class ConfigurationError(StorageBenchError, ValueError):
    """Endpoint or run configuration is unusable (e.g. missing API key variable)."""


class DeliveryError(StorageBenchError, RuntimeError):
    """All retry attempts against an endpoint failed."""

    def __init__(self, message, last_status=None):
        super().__init__(message)
        self.last_status = last_status


class DataIntegrityError(StorageBenchError, ValueError):
    """Cross-file references do not line up (e.g. ground truth names a missing container)."""


class UndefinedKappaError(StorageBenchError, ValueError):
    """Fleiss' kappa is undefined because expected agreement is 1 (single used category)."""


class QuotaError(StorageBenchError, ValueError):
    """Not enough eligible images to satisfy a sampling quota."""

    def __init__(self, message, item=None):
        super().__init__(message)
        self.item = item
