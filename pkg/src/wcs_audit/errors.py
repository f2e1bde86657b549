"""Exception types shared across the audit pipeline."""


class WcsError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(WcsError):
    """A line of an input file could not be parsed."""

    def __init__(self, path, line_no: int, message: str):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{self.path}:{line_no}: {message}")


class ValidationError(WcsError):
    """Input violated a documented precondition or invariant."""


class ShortageError(ValidationError):
    """Fewer valid items were found than requested."""

    def __init__(self, message: str, found: int, needed: int):
        self.found = found
        self.needed = needed
        super().__init__(f"{message} (found {found}, needed {needed})")


class TokenizerError(WcsError):
    """Text could not be encoded under the active tokenizer."""


class AlignmentError(WcsError):
    """The word's first character shares a token with non-whitespace prefix text."""


class VocabularyMismatchError(WcsError):
    """A token id fell outside the oracle's vocabulary."""


class OracleError(WcsError):
    """The step oracle failed to produce a distribution."""


class AuditStepError(WcsError):
    """An audit trial aborted at a specific token step."""

    def __init__(self, word: str, context_id: int, step_index: int, cause: Exception):
        self.word = word
        self.context_id = context_id
        self.step_index = step_index
        self.cause = cause
        super().__init__(
            f"audit of {word!r} (context {context_id}) aborted at step {step_index}: {cause}"
        )


class ReplayMissError(WcsError):
    """A trace replay query had no matching precomputed step."""


class TemperatureError(WcsError, KeyError):
    """A requested temperature is not present in the recorded statistics."""

    def __str__(self):  # KeyError quotes its repr otherwise
        return Exception.__str__(self)


class TraceSchemaError(WcsError):
    """An audit trace line violated the record schema."""

    def __init__(self, path, line_no: int, message: str):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{self.path}:{line_no}: {message}")


class UndefinedCorrelationError(ValidationError):
    """Correlation is undefined because one variable has zero variance."""
