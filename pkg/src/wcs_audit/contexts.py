"""Context extraction: random-entry forward search for word occurrences.

A corpus is a directory of ``.txt`` documents. For each target word we pick
a random byte offset over the whole corpus, scan forward (wrapping across
document boundaries) for the first boundary-matched occurrence with enough
preceding text, run the coherence filter, and repeat until the requested
number of distinct occurrences is collected.
"""

from __future__ import annotations

import json
import random
import re
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

from .errors import ShortageError, ValidationError

DEFAULT_PREFIX_CHAR_BUDGET = 2048
DEFAULT_TRIAL_BUDGET = 10_000

_WS_RE = re.compile(r"\s+")

CoherencePredicate = Callable[[str], bool]


@dataclass(frozen=True)
class ContextSample:
    """One occurrence of a target word with its raw preceding text.

    ``word_start``/``word_end`` are byte offsets into the cleaned (UTF-8,
    invalid-sequence-replaced) document text. ``surface`` is the matched
    form as it appears in the document ("Demon" for target "demon").
    """

    word: str
    doc_id: str
    word_start: int
    word_end: int
    prefix_text: str
    context_id: int
    surface: str


class CorpusIndex:
    """Immutable view of a plain-text corpus directory.

    Documents are decoded as UTF-8 with invalid sequences replaced; all
    offsets refer to the UTF-8 encoding of that cleaned text.
    """

    def __init__(self, docs: list[tuple[str, str]]):
        if not docs:
            raise ValidationError("corpus is empty")
        self._ids = [doc_id for doc_id, _ in docs]
        self._texts = {doc_id: text for doc_id, text in docs}
        self._bytes = {doc_id: text.encode("utf-8") for doc_id, text in docs}
        self._cum = []
        total = 0
        for doc_id in self._ids:
            total += len(self._bytes[doc_id])
            self._cum.append(total)
        self.total_bytes = total

    @classmethod
    def from_directory(cls, corpus_dir) -> "CorpusIndex":
        paths = sorted(Path(corpus_dir).glob("*.txt"))
        if not paths:
            raise ValidationError(f"no .txt documents under {corpus_dir}")
        docs = []
        for p in paths:
            text = p.read_bytes().decode("utf-8", errors="replace")
            docs.append((p.stem, text))
        return cls(docs)

    @property
    def docs(self) -> list[tuple[str, int]]:
        return [(doc_id, len(self._bytes[doc_id])) for doc_id in self._ids]

    def doc_ids(self) -> list[str]:
        return list(self._ids)

    def text(self, doc_id: str) -> str:
        return self._texts[doc_id]

    def slice_bytes(self, doc_id: str, start: int, end: int) -> str:
        return self._bytes[doc_id][start:end].decode("utf-8", errors="replace")

    def locate(self, byte_offset: int) -> tuple[int, int]:
        """Map a corpus-global byte offset to (doc index, local byte offset)."""
        if not 0 <= byte_offset < self.total_bytes:
            raise ValidationError(f"byte offset {byte_offset} outside corpus")
        idx = bisect_right(self._cum, byte_offset)
        prev = self._cum[idx - 1] if idx > 0 else 0
        return idx, byte_offset - prev

    def char_index_at_or_after(self, doc_id: str, byte_offset: int) -> int:
        """First character position whose byte offset is >= ``byte_offset``."""
        prefix = self._bytes[doc_id][:byte_offset]
        n = len(prefix.decode("utf-8", errors="ignore"))
        # a split multi-byte character counts as lying before the offset
        if len(self._texts[doc_id][:n].encode("utf-8")) < byte_offset:
            n += 1
        return n

    def byte_offset_of_char(self, doc_id: str, char_index: int) -> int:
        return len(self._texts[doc_id][:char_index].encode("utf-8"))


def heuristic_coherence(prefix_text: str) -> bool:
    """Reject prefixes that look like front matter rather than prose.

    A prefix fails when its alphabetic character ratio is below 0.6, it has
    more than one line break per 40 characters, or digits make up more than
    20% of it.
    """
    n = len(prefix_text)
    if n == 0:
        return False
    alpha = sum(1 for c in prefix_text if c.isalpha())
    if alpha / n < 0.6:
        return False
    if prefix_text.count("\n") / n > 1 / 40:
        return False
    digits = sum(1 for c in prefix_text if c.isdigit())
    if digits / n > 0.2:
        return False
    return True


def _surfaces(word: str) -> list[str]:
    """Accepted surface forms: as-is, plus sentence-initial capitalization."""
    forms = [word]
    cap = word[0].upper() + word[1:]
    if cap != word:
        forms.append(cap)
    return forms


def _boundary_ok(text: str, start: int, end: int) -> bool:
    """Both neighbours must be absent or non-letters."""
    if start > 0 and text[start - 1].isalpha():
        return False
    if end < len(text) and text[end].isalpha():
        return False
    return True


def iter_occurrences(text: str, word: str, from_char: int = 0) -> Iterable[tuple[int, str]]:
    """Yield (char_start, surface) for boundary-matched occurrences in order."""
    forms = _surfaces(word)
    pos = from_char
    n = len(word)
    while True:
        hits = [(text.find(f, pos), f) for f in forms]
        hits = [(i, f) for i, f in hits if i >= 0]
        if not hits:
            return
        start, surface = min(hits)
        if _boundary_ok(text, start, start + n):
            yield start, surface
        pos = start + 1


def _clean_prefix(text: str, char_start: int, budget: int) -> str:
    """The up-to-``budget`` characters before ``char_start``, never starting
    inside a word.

    When the budget cut lands mid-word the fragment is dropped (closed-
    vocabulary tokenizers cannot encode partial words, and the audit keeps
    only the last L tokens anyway). May return "" if the window holds no
    whitespace at all.
    """
    lo = max(0, char_start - budget)
    if lo > 0 and not text[lo - 1].isspace() and not text[lo].isspace():
        cut = _WS_RE.search(text, lo, char_start)
        if cut is None:
            return ""
        lo = cut.end()
    return text[lo:char_start]


def find_contexts(
    corpus: CorpusIndex,
    word: str,
    n_contexts: int,
    min_prefix_chars: int,
    seed: int,
    coherence: CoherencePredicate = heuristic_coherence,
    prefix_char_budget: int = DEFAULT_PREFIX_CHAR_BUDGET,
    trial_budget: int = DEFAULT_TRIAL_BUDGET,
    allow_short: bool = False,
) -> list[ContextSample]:
    """Collect ``n_contexts`` distinct occurrences of ``word`` by random entry.

    Each trial draws a uniform byte offset, scans forward from it (wrapping
    through subsequent documents, at most one full cycle) and takes the
    first occurrence that passes the boundary rule, the minimum-prefix rule
    and the coherence filter, and is not already collected. Deterministic
    for a fixed seed. A shortage raises unless ``allow_short``, in which
    case whatever was found is returned.
    """
    if n_contexts < 1:
        raise ValidationError(f"n_contexts must be >= 1 (got {n_contexts})")
    if not word:
        raise ValidationError("word must be non-empty")

    rng = random.Random(seed)
    doc_ids = corpus.doc_ids()
    collected: list[ContextSample] = []
    taken: set[tuple[str, int]] = set()

    for _ in range(trial_budget):
        if len(collected) >= n_contexts:
            break
        offset = rng.randrange(corpus.total_bytes)
        doc_idx, local = corpus.locate(offset)
        start_char = corpus.char_index_at_or_after(doc_ids[doc_idx], local)

        found_new = False
        # one full cycle: every later doc, then back over the head of the
        # starting doc that the initial forward scan skipped
        for hop in range(len(doc_ids) + 1):
            doc_id = doc_ids[(doc_idx + hop) % len(doc_ids)]
            text = corpus.text(doc_id)
            from_char = start_char if hop == 0 else 0
            for char_start, surface in iter_occurrences(text, word, from_char):
                if char_start < max(min_prefix_chars, 1):
                    continue
                prefix = _clean_prefix(text, char_start, prefix_char_budget)
                if not prefix or not coherence(prefix):
                    continue
                word_start = corpus.byte_offset_of_char(doc_id, char_start)
                if (doc_id, word_start) in taken:
                    continue
                taken.add((doc_id, word_start))
                collected.append(
                    ContextSample(
                        word=word,
                        doc_id=doc_id,
                        word_start=word_start,
                        word_end=word_start + len(surface.encode("utf-8")),
                        prefix_text=prefix,
                        context_id=len(collected),
                        surface=surface,
                    )
                )
                found_new = True
                break
            if found_new:
                break
        if not found_new:
            # a full wrap found nothing new: no further trial can either
            break

    if len(collected) < n_contexts and not allow_short:
        raise ShortageError(
            f"could not collect {n_contexts} contexts for {word!r}",
            found=len(collected),
            needed=n_contexts,
        )
    return collected


def revalidate(corpus: CorpusIndex, sample: ContextSample) -> bool:
    """Slicing the document at the recorded offsets must reproduce the match."""
    got = corpus.slice_bytes(sample.doc_id, sample.word_start, sample.word_end)
    return got == sample.surface and got.lower() == sample.word.lower()


def write_contexts(samples: list[ContextSample], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(context_to_json(s) + "\n")


def context_to_json(s: ContextSample) -> str:
    return json.dumps(
        {
            "word": s.word,
            "doc_id": s.doc_id,
            "word_start": s.word_start,
            "word_end": s.word_end,
            "prefix_text": s.prefix_text,
            "context_id": s.context_id,
            "surface": s.surface,
        },
        ensure_ascii=False,
    )


def load_contexts(path) -> list[ContextSample]:
    """Read a contexts JSONL file; ``surface`` defaults to the word itself."""
    samples = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            try:
                samples.append(
                    ContextSample(
                        word=obj["word"],
                        doc_id=obj["doc_id"],
                        word_start=int(obj["word_start"]),
                        word_end=int(obj["word_end"]),
                        prefix_text=obj["prefix_text"],
                        context_id=int(obj["context_id"]),
                        surface=obj.get("surface", obj["word"]),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"{path}:{line_no}: bad context record: {exc}") from None
    return samples
