"""Job description and input readers.

The contexts file is the hand-off point from the context-extraction stage:
one JSON object per line with the word, its document offsets, the raw
preceding text and a per-word context id. ``surface`` (the matched form,
possibly capitalized) defaults to the word itself when absent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .errors import ContextFormatError, ExtractionError

DEFAULT_TEMPERATURES = (0.7, 1.0, 1.5)
DEFAULT_PREFIX_TOKENS = 256


@dataclass(frozen=True)
class ExtractionJob:
    """Everything needed to turn a contexts file into a trace file.

    ``temperatures`` is deduplicated and sorted ascending; statistics are
    recorded at every listed temperature and ranks are computed at the
    lowest one. ``prefix_tokens`` is the maximum number of context tokens
    kept before the word (the L in the trace metadata).
    """

    model: str
    contexts_path: str
    out_path: str
    temperatures: tuple[float, ...] = DEFAULT_TEMPERATURES
    batch_size: int = 8
    device: str = "cpu"
    prefix_tokens: int = DEFAULT_PREFIX_TOKENS
    targets_path: str | None = None
    apply_chat_template: bool = False

    def __post_init__(self):
        if not self.model:
            raise ExtractionError("model identifier must be non-empty")
        try:
            temps = tuple(sorted({float(t) for t in self.temperatures}))
        except (TypeError, ValueError):
            raise ExtractionError(f"temperatures must be numbers (got {self.temperatures!r})") from None
        if not temps:
            raise ExtractionError("at least one temperature is required")
        for t in temps:
            if not math.isfinite(t) or t <= 0.0:
                raise ExtractionError(f"temperatures must be finite and positive (got {t!r})")
        object.__setattr__(self, "temperatures", temps)
        if self.batch_size < 1:
            raise ExtractionError(f"batch_size must be >= 1 (got {self.batch_size})")
        if self.prefix_tokens < 1:
            raise ExtractionError(f"prefix_tokens must be >= 1 (got {self.prefix_tokens})")


@dataclass(frozen=True)
class Context:
    """One word occurrence to score: raw preceding text plus the surface form."""

    word: str
    doc_id: str
    word_start: int
    word_end: int
    prefix_text: str
    context_id: int
    surface: str


def _require(obj: dict, key: str, kind: type, line_no: int, path) -> object:
    if key not in obj:
        raise ContextFormatError(f"{path}:{line_no}: missing key {key!r}")
    value = obj[key]
    # bool is an int subclass; an int field holding true/false is a bug
    if isinstance(value, bool) or not isinstance(value, kind):
        raise ContextFormatError(
            f"{path}:{line_no}: {key} must be {kind.__name__} (got {type(value).__name__})"
        )
    return value


def read_contexts(path) -> list[Context]:
    """Read and validate a contexts JSONL file.

    Unknown keys are ignored (the producing side may annotate records);
    missing or mistyped required keys raise ContextFormatError with the
    offending line number.
    """
    contexts: list[Context] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ContextFormatError(f"{path}:{line_no}: invalid JSON: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise ContextFormatError(f"{path}:{line_no}: record must be a JSON object")
            word = _require(obj, "word", str, line_no, path)
            if not word:
                raise ContextFormatError(f"{path}:{line_no}: word must be non-empty")
            surface = obj.get("surface", word)
            if not isinstance(surface, str) or not surface:
                raise ContextFormatError(f"{path}:{line_no}: surface must be a non-empty string")
            contexts.append(
                Context(
                    word=word,
                    doc_id=_require(obj, "doc_id", str, line_no, path),
                    word_start=_require(obj, "word_start", int, line_no, path),
                    word_end=_require(obj, "word_end", int, line_no, path),
                    prefix_text=_require(obj, "prefix_text", str, line_no, path),
                    context_id=_require(obj, "context_id", int, line_no, path),
                    surface=surface,
                )
            )
    return contexts


def load_target_ranks(path) -> dict[str, int]:
    """Read a target-set JSON array and return word -> frequency rank."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            entries = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ExtractionError(f"{path}: invalid JSON: {exc.msg}") from None
    if not isinstance(entries, list):
        raise ExtractionError(f"{path}: target set must be a JSON array")
    ranks: dict[str, int] = {}
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or "word" not in entry or "rank" not in entry:
            raise ExtractionError(f"{path}: entry {i} must be an object with word and rank")
        ranks[str(entry["word"])] = int(entry["rank"])
    return ranks
