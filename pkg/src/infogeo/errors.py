"""Exception hierarchy shared by the library and the CLI."""


class InfoGeoError(Exception):
    """Base class for all errors raised by infogeo."""


class ValidationError(InfoGeoError, ValueError):
    """Input violates a precondition (shape, range, finiteness, ...)."""


class DataFileError(InfoGeoError, OSError):
    """A manifest or sample file could not be found or read."""


class NumericalError(InfoGeoError, ArithmeticError):
    """A computation produced a non-finite or otherwise unusable result."""
