"""Exception types raised by klmismatch."""


class KLMismatchError(ValueError):
    """Base class for all validation errors in this package."""


class NegativeEntryError(KLMismatchError):
    pass


class NotNormalizedError(KLMismatchError):
    pass


class TooSmallError(KLMismatchError):
    pass


class DimensionMismatchError(KLMismatchError):
    pass


class LengthMismatchError(KLMismatchError):
    pass


class UndefinedColumnError(KLMismatchError):
    """Raised when a decision is requested at an observation with zero mass."""


class InvalidGeneratorError(KLMismatchError):
    pass


class OutOfRangeError(KLMismatchError):
    pass


class MissingConstraintError(KLMismatchError):
    pass


class InvalidSpecError(KLMismatchError):
    pass


class GridOutOfRangeError(KLMismatchError):
    pass


class EmptyResultError(KLMismatchError):
    """No sample passed the Bayes-error constraint."""


class MalformedFileError(KLMismatchError):
    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(message if row is None else f"row {row}: {message}")
