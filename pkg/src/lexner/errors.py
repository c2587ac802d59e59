"""Exception hierarchy shared by all lexner modules.

The CLI maps these onto its exit-code taxonomy: configuration problems
exit 1, data/IO problems exit 2, numeric faults exit 3.
"""


class LexnerError(Exception):
    """Base class for all lexner errors."""


class ConfigError(LexnerError):
    """Invalid or missing configuration (unknown key, bad value, unset path)."""


class DataError(LexnerError):
    """Problem with input data or files."""


class ParseError(DataError):
    """Malformed line in a corpus file."""


class FormatError(DataError):
    """Malformed embedding, container, or checkpoint file."""


class SchemeError(DataError):
    """Tag not in the scheme, or an illegal tag transition in gold data."""


class ShapeError(LexnerError):
    """Array shapes do not conform for an operation."""


class NumericError(LexnerError):
    """NaN/Inf encountered, or a gradient check failed to evaluate."""
