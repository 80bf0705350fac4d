"""Exception types shared across the package."""


class OnomaError(Exception):
    """Base class for package-specific failures."""


class InputFormatError(OnomaError):
    """An input file does not conform to its documented format."""


class ConfigError(OnomaError):
    """A configuration value is out of range or inconsistent."""


class InvariantError(OnomaError):
    """An internal consistency check failed."""
