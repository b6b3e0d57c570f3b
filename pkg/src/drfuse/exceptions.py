"""Exception types shared across the package.

Callers can route on these: e.g. a definiteness failure in the plain
generalized eigensolver means the singular-range solver applies instead.
"""


class DrfuseError(Exception):
    """Base class for all package errors."""


class InputError(DrfuseError, ValueError):
    """Malformed input: non-finite entries, dimension mismatch, bad shapes."""


class DefinitenessError(DrfuseError, ValueError):
    """A matrix required to be positive definite is not."""


class RankError(DrfuseError, ValueError):
    """A rank precondition is violated (e.g. more rows requested than rank allows)."""


class DegenerateInputError(DrfuseError, ValueError):
    """Input is degenerate beyond recovery (e.g. rank-0 where rank >= 1 is needed)."""


class FramingError(DrfuseError, ValueError):
    """A serialized message does not parse: bad magic, version, or length."""


class CorruptMessageError(DrfuseError, ValueError):
    """A parsed message is internally inconsistent and cannot be reconstructed."""
