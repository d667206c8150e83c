"""Exception types shared across the package."""


class DataError(Exception):
    """Unreadable, missing, or inconsistent input data."""


class ConfigError(Exception):
    """Invalid configuration value or argument combination."""


class NumericError(Exception):
    """Numerical failure: non-finite objective, gradients, or parameters."""
