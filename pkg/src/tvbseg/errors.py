"""Error types shared across the toolkit.

Invalid user input (bad shapes, malformed arguments) raises the builtin
ValueError. The types below cover the two failure classes that callers and
the CLI need to tell apart: unreadable/ill-formed files versus computations
that went numerically bad.
"""


class FormatError(Exception):
    """A file or byte stream does not conform to an expected layout."""


class NumericError(Exception):
    """A computation produced non-finite or otherwise unusable values."""
