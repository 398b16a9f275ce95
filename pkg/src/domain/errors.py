"""Exception hierarchy for pivkit.

Every error raised on purpose by the package derives from ``PivError``, which
is itself a ``ValueError`` so callers that only know "bad input" keep working.
The CLI maps each class to an exit status (see ``src.main_cli``).
"""

from typing import Optional


class PivError(ValueError):
    """Base class for all pivkit errors."""


class StudyValidationError(PivError):
    """An input field violates its invariant.

    Attributes:
        field: Dotted path of the offending field (e.g. "study.var_treated").
    """

    def __init__(self, field: str, message: str) -> None:
        self.field = field
        super().__init__(f"{field}: {message}")


class AmbiguousDirectionError(PivError):
    """The observed estimate is exactly zero, so no significant effect exists to defend."""


class DomainError(PivError):
    """A numeric kernel received an argument outside its domain."""


class SaturationError(PivError):
    """A probability of exactly 0 or 1 was asked to be inverted.

    Attributes:
        value: The saturated probability.
    """

    def __init__(self, message: str, value: Optional[float] = None) -> None:
        self.value = value
        super().__init__(message)


class ContractError(PivError):
    """An operation was called outside its precondition."""
