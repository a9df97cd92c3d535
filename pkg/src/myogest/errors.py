"""Exception hierarchy shared across the toolkit.

The CLI maps these onto process exit codes (config=2, data=3, numerical=4),
so library code should raise the most specific class that applies.
"""


class MyogestError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(MyogestError):
    """Invalid or inconsistent run configuration."""


class DataError(MyogestError):
    """Malformed dataset content; message should name the offending path."""


class DegenerateProfileError(DataError):
    """Activation profile cannot be normalized (all-zero signals)."""


class NumericalError(MyogestError):
    """A numerical routine failed to produce a usable result."""
