"""Exception types raised across the package.

Data problems (bad files, malformed records, degenerate inputs) derive from
``RcdError`` so the CLI can map them to exit code 2 in one place. Plain I/O
failures surface as the builtin ``OSError`` family.
"""


class RcdError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(RcdError, ValueError):
    """Invalid configuration values."""


class InvalidRange(RcdError, ValueError):
    pass


class DecodeError(RcdError, ValueError):
    """Image file exists but cannot be decoded as PNG or JPEG."""


class EmptyCorpus(RcdError):
    pass


class ParseError(RcdError, ValueError):
    """Malformed line or row in a text file. ``lineno`` is 1-based."""

    def __init__(self, message, lineno=None, path=None):
        self.lineno = lineno
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if lineno is not None:
            where += f"line {lineno}: "
        elif where:
            where += " "
        super().__init__(where + message)


class InsufficientIdentities(RcdError):
    pass


class DimensionMismatch(RcdError, ValueError):
    pass


class DegenerateBatch(RcdError, ValueError):
    pass


class MissingProbs(RcdError, ValueError):
    pass


class LabelOutOfRange(RcdError, ValueError):
    pass


class NoValidQueries(RcdError):
    pass


class DomainError(RcdError, ValueError):
    pass


class IndexOutOfRange(RcdError, IndexError):
    pass


class BadVoteValue(RcdError, ValueError):
    pass
