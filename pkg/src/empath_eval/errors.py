"""Exception hierarchy shared across the package.

The CLI maps ``ValidationError`` to exit status 1 and
``InsufficientDataError`` to exit status 2.
"""

from __future__ import annotations


class EmpathEvalError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(EmpathEvalError, ValueError):
    """Input violates a declared contract."""


class ParseError(ValidationError):
    """A row could not be decoded in the declared format."""


class DuplicateError(ValidationError):
    pass


class RangeError(ValidationError):
    pass


class SchemaError(ValidationError):
    """Required field missing or an unknown tag was used."""


class ValueTypeError(ValidationError):
    """Class label used under a continuous setting, or the reverse."""


class NormalizationError(ValidationError):
    """Probability vector does not sum to one."""


class DimensionError(ValidationError):
    pass


class ShapeError(ValidationError):
    pass


class NonFiniteError(ValidationError):
    """NaN or infinite component where finite values are required."""


class DomainError(ValidationError):
    """Operation undefined for the input, e.g. cosine of a zero vector."""


class MissingEmbeddingError(ValidationError, KeyError):
    def __init__(self, story_id: str):
        super().__init__(f"no embedding for story_id {story_id!r}")
        self.story_id = story_id

    def __str__(self) -> str:
        return self.args[0]


class RosterError(ValidationError):
    """Annotator group references an annotator absent from the data."""


class DivergenceError(EmpathEvalError, ArithmeticError):
    def __init__(self, epoch: int, value: float):
        super().__init__(f"non-finite training loss {value!r} at epoch {epoch}")
        self.epoch = epoch
        self.value = value


class InsufficientDataError(EmpathEvalError):
    """Not enough data points to compute the requested quantity."""


class UndefinedMetricError(EmpathEvalError, ArithmeticError):
    """Metric undefined for the input (zero variance) under strict mode."""
