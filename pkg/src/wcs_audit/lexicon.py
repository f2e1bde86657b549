"""Frequency-ranked word list ingestion and band-limited target selection.

The word list format is one ``word<TAB>count`` record per line, sorted by
descending count (Norvig-style web frequency lists). Rank is the 1-based
line position, not a column in the file.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import ParseError, ShortageError, ValidationError

_LETTERS_RE = re.compile(r"^[a-z]+$")


@dataclass(frozen=True)
class LexEntry:
    """A word with its frequency rank (1-based) and raw occurrence count."""

    word: str
    rank: int
    count: int


@dataclass(frozen=True)
class TargetSet:
    """Band-limited random selection of target words, ordered by rank."""

    entries: tuple[LexEntry, ...]
    seed: int
    band_lo: int
    band_hi: int

    def words(self) -> list[str]:
        return [e.word for e in self.entries]


def load_frequency_list(path) -> list[LexEntry]:
    """Parse a ``word<TAB>count`` frequency list into ranked entries.

    Counts must be non-increasing down the file; duplicate words and
    malformed lines are rejected with their line number.
    """
    entries: list[LexEntry] = []
    seen: set[str] = set()
    prev_count: int | None = None
    text = Path(path).read_text(encoding="utf-8")
    for line_no, line in enumerate(text.splitlines(), start=1):
        if "\t" not in line:
            raise ParseError(path, line_no, "expected 'word<TAB>count'")
        word, _, count_field = line.partition("\t")
        word = word.strip().lower()
        if not word or any(c.isspace() for c in word):
            raise ParseError(path, line_no, f"bad word field {word!r}")
        try:
            count = int(count_field.strip())
        except ValueError:
            raise ParseError(path, line_no, f"non-numeric count {count_field.strip()!r}") from None
        if count < 0:
            raise ParseError(path, line_no, f"negative count {count}")
        if word in seen:
            raise ParseError(path, line_no, f"duplicate word {word!r}")
        if prev_count is not None and count > prev_count:
            raise ValidationError(
                f"{path}:{line_no}: counts not sorted descending ({count} > {prev_count})"
            )
        seen.add(word)
        entries.append(LexEntry(word=word, rank=line_no, count=count))
        prev_count = count
    return entries


def load_dictionary(path) -> set[str]:
    """Load a one-word-per-line dictionary file as a lowercased set."""
    words: set[str] = set()
    text = Path(path).read_text(encoding="utf-8")
    for line in text.splitlines():
        word = line.strip().lower()
        if word:
            words.add(word)
    return words


def is_lexical(word: str, dictionary: set[str]) -> bool:
    """A candidate is lexical if it is plain ASCII letters and dictionary-listed."""
    return bool(_LETTERS_RE.match(word)) and word in dictionary


def select_targets(
    entries: list[LexEntry],
    dictionary: set[str],
    band_lo: int,
    band_hi: int,
    n_words: int,
    seed: int,
) -> TargetSet:
    """Uniformly sample ``n_words`` dictionary-valid words from the rank band.

    Selection is a pure function of its inputs: candidates are ordered by
    rank and drawn without replacement via a seeded Fisher-Yates partial
    shuffle, so a fixed seed reproduces the same set on any platform. The
    result is ordered by ascending rank.
    """
    if band_lo >= band_hi:
        raise ValidationError(f"band_lo must be < band_hi (got {band_lo}, {band_hi})")
    if n_words < 0:
        raise ValidationError(f"n_words must be >= 0 (got {n_words})")
    if n_words == 0:
        return TargetSet(entries=(), seed=seed, band_lo=band_lo, band_hi=band_hi)

    candidates = [
        e for e in entries if band_lo <= e.rank <= band_hi and is_lexical(e.word, dictionary)
    ]
    if len(candidates) < n_words:
        raise ShortageError(
            f"not enough dictionary-valid words in rank band [{band_lo}, {band_hi}]",
            found=len(candidates),
            needed=n_words,
        )

    rng = random.Random(seed)
    pool = list(candidates)  # rank-ascending going in
    for i in range(n_words):
        j = rng.randrange(i, len(pool))
        pool[i], pool[j] = pool[j], pool[i]
    chosen = sorted(pool[:n_words], key=lambda e: e.rank)
    return TargetSet(entries=tuple(chosen), seed=seed, band_lo=band_lo, band_hi=band_hi)


def write_target_set(targets: TargetSet, path) -> None:
    """Write the selection as a JSON array of {word, rank, count}."""
    payload = [{"word": e.word, "rank": e.rank, "count": e.count} for e in targets.entries]
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_target_set(path) -> list[LexEntry]:
    """Read back a target-set JSON file written by :func:`write_target_set`."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, list):
        raise ValidationError(f"{path}: target set must be a JSON array")
    entries = []
    for obj in raw:
        try:
            entries.append(LexEntry(word=obj["word"], rank=int(obj["rank"]), count=int(obj["count"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{path}: bad target entry {obj!r}: {exc}") from None
    return entries
