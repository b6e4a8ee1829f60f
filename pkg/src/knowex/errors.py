"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes, so raising the right class
matters: ConfigError -> 2, DataError -> 3, EstimationError -> 4.
"""


class KnowexError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(KnowexError):
    """Bad or inconsistent configuration (unknown key, unparsable value)."""


class DataError(KnowexError):
    """Malformed or inconsistent input data (parse failures, broken references)."""


class EstimationError(KnowexError):
    """Estimation cannot proceed (rank deficiency, degenerate denominator)."""
