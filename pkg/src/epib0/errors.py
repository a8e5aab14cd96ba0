"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid acquisition geometry, filter size, or configuration value."""


class FilterTooLargeError(ParameterError):
    """The requested filter admits no fully sampled rows for this sampling pattern."""


class DataFormatError(Exception):
    """A dataset file is truncated, corrupted, or has an unsupported layout."""


class NumericalError(RuntimeError):
    """An iterative solver diverged or otherwise failed to make progress."""
