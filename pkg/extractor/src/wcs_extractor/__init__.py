"""Model-side trace extraction for word coverage audits.

Produces the trace JSONL files the audit engine sweeps offline: one
record per (word, context) with per-step, per-temperature sufficient
statistics from a causal language model.
"""

from .errors import (
    BoundaryMergeError,
    ContextFormatError,
    ExtractionError,
    ExtractorError,
    RankMismatchError,
)
from .extract import ExtractionSummary, SkippedContext, align_word, extract, step_statistics
from .job import Context, ExtractionJob, read_contexts
from .validate import TraceReport, compare_traces, validate_trace

__all__ = [
    "BoundaryMergeError",
    "Context",
    "ContextFormatError",
    "ExtractionError",
    "ExtractionJob",
    "ExtractionSummary",
    "ExtractorError",
    "RankMismatchError",
    "SkippedContext",
    "TraceReport",
    "align_word",
    "compare_traces",
    "extract",
    "read_contexts",
    "step_statistics",
    "validate_trace",
]
