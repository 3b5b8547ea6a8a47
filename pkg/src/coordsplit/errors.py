"""Exception hierarchy shared by every layer."""


class CoordSplitError(Exception):
    """Base class for all library errors."""


class DimensionError(CoordSplitError, ValueError):
    """Operand shapes do not agree."""


class ParameterError(CoordSplitError, ValueError):
    """A numeric parameter is outside its admissible range."""


class ConfigurationError(CoordSplitError, ValueError):
    """An invalid combination of solver settings."""


class InfeasibleError(CoordSplitError, ValueError):
    """The constraint set of a projection is empty."""


class ParseError(CoordSplitError, ValueError):
    """Malformed input file.

    Attributes
    ----------
    line : int or None
        1-based line number of the offending record.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
