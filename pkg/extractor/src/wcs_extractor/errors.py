"""Exception taxonomy for the extractor.

Everything raised on purpose derives from ExtractorError so callers can
catch one type. I/O problems propagate as OSError.
"""

from __future__ import annotations


class ExtractorError(Exception):
    """Base class for all extraction failures."""


class ContextFormatError(ExtractorError):
    """A contexts JSONL file does not match the documented schema."""


class BoundaryMergeError(ExtractorError):
    """The tokenizer fused the word with non-whitespace preceding text.

    Such a context cannot be audited as a clean forced path; the caller
    skips and logs it rather than aborting the run.
    """


class RankMismatchError(ExtractorError):
    """The target's rank differs between configured temperatures.

    Temperature scaling preserves the exact ordering of logits, so a
    mismatch can only come from floating-point collapse of near-ties.
    The run stops rather than emit a trace with an ambiguous rank.
    """


class ExtractionError(ExtractorError):
    """A job cannot run as specified (bad parameters, model problems)."""
