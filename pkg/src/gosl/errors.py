"""Exception hierarchy shared across the package."""


class GoslError(Exception):
    """Base class for all package errors."""


class GraphStructureError(GoslError):
    """Adjacency or feature matrices violate a structural requirement."""


class CapacityError(GoslError):
    """A node partition is too small to honour the requested split sizes."""


class ConfigError(GoslError):
    """Invalid configuration value or key."""


class NumericError(GoslError):
    """A non-finite value appeared where finite arithmetic was required."""


class DatasetError(GoslError):
    """Dataset files missing, malformed, or unknown registry name."""


class MetricError(GoslError):
    """A metric is undefined for the given inputs (e.g. one-class test set)."""


class StateError(GoslError):
    """Persisted loop state is missing, corrupt, or used out of order."""
