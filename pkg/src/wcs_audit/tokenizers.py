"""Pluggable tokenizers and word-to-token-path alignment.

Three built-in tokenizers cover desk-scale runs with no ML runtime: a
whitespace word-level tokenizer with a closed vocabulary (the reference
model's), a byte-level fallback, and a greedy longest-match subword
tokenizer loadable from a vocab+merges JSON file.

Alignment always tokenizes the full prefix+word string: a word's token
path during generation is whatever the running token stream produces,
which can differ from tokenizing the word in isolation.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence, runtime_checkable

from .contexts import ContextSample
from .errors import AlignmentError, TokenizerError, ValidationError

_NONSPACE_RE = re.compile(r"\S+")


@runtime_checkable
class Tokenizer(Protocol):
    vocab_size: int

    def encode(self, text: str) -> list[int]: ...

    def decode(self, ids: Sequence[int]) -> str: ...

    def encode_with_offsets(self, text: str) -> tuple[list[int], list[tuple[int, int]]]:
        """Token ids plus the character span each token covers in ``text``."""
        ...


@dataclass(frozen=True)
class TokenPath:
    """The L-token prefix and the word's in-context token sequence."""

    prefix_tokens: tuple[int, ...]
    word_tokens: tuple[int, ...]
    word: str
    n_word_tokens: int
    short_prefix: bool = False


class WhitespaceTokenizer:
    """Word-level tokenizer over a closed vocabulary of whitespace-split runs.

    ``decode`` joins with single spaces, so round-trip holds exactly for
    single-space-separated text (the audited reference corpora).
    """

    def __init__(self, vocab: Iterable[str]):
        self._tokens = sorted(set(vocab))
        if not self._tokens:
            raise ValidationError("whitespace tokenizer needs a non-empty vocabulary")
        self._ids = {t: i for i, t in enumerate(self._tokens)}
        self.vocab_size = len(self._tokens)

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "WhitespaceTokenizer":
        vocab = set()
        for text in texts:
            vocab.update(_NONSPACE_RE.findall(text))
        return cls(vocab)

    def token(self, token_id: int) -> str:
        return self._tokens[token_id]

    def encode(self, text: str) -> list[int]:
        return self.encode_with_offsets(text)[0]

    def encode_with_offsets(self, text: str) -> tuple[list[int], list[tuple[int, int]]]:
        ids, spans = [], []
        for m in _NONSPACE_RE.finditer(text):
            tok = m.group(0)
            if tok not in self._ids:
                raise TokenizerError(f"out-of-vocabulary token {tok!r}")
            ids.append(self._ids[tok])
            spans.append(m.span())
        return ids, spans

    def decode(self, ids: Sequence[int]) -> str:
        return " ".join(self._tokens[i] for i in ids)


class ByteTokenizer:
    """UTF-8 byte-level fallback: 256 tokens, exact round-trip."""

    vocab_size = 256

    def encode(self, text: str) -> list[int]:
        return list(text.encode("utf-8"))

    def encode_with_offsets(self, text: str) -> tuple[list[int], list[tuple[int, int]]]:
        ids, spans = [], []
        for i, ch in enumerate(text):
            for b in ch.encode("utf-8"):
                ids.append(b)
                spans.append((i, i + 1))
        return ids, spans

    def decode(self, ids: Sequence[int]) -> str:
        return bytes(ids).decode("utf-8", errors="replace")


class GreedyBpeTokenizer:
    """Greedy longest-match subword tokenizer over vocab plus merge products.

    The effective vocabulary is the base vocab united with the concatenation
    of every merge pair; encoding repeatedly takes the longest vocabulary
    string matching at the cursor.
    """

    def __init__(self, vocab: Sequence[str], merges: Sequence[tuple[str, str]] = ()):
        tokens: list[str] = []
        seen = set()
        for t in list(vocab) + ["".join(pair) for pair in merges]:
            if not t:
                raise ValidationError("empty string in vocabulary")
            if t not in seen:
                seen.add(t)
                tokens.append(t)
        if not tokens:
            raise ValidationError("subword tokenizer needs a non-empty vocabulary")
        self._tokens = tokens
        self._ids = {t: i for i, t in enumerate(tokens)}
        self._max_len = max(len(t) for t in tokens)
        self.vocab_size = len(tokens)

    @classmethod
    def from_file(cls, path) -> "GreedyBpeTokenizer":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        try:
            vocab = obj["vocab"]
            merges = [tuple(pair) for pair in obj.get("merges", [])]
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"{path}: expected {{vocab: [...], merges: [[a,b],...]}}: {exc}")
        if any(len(p) != 2 for p in merges):
            raise ValidationError(f"{path}: merges must be pairs")
        return cls(vocab, merges)

    def token(self, token_id: int) -> str:
        return self._tokens[token_id]

    def encode(self, text: str) -> list[int]:
        return self.encode_with_offsets(text)[0]

    def encode_with_offsets(self, text: str) -> tuple[list[int], list[tuple[int, int]]]:
        ids, spans = [], []
        pos = 0
        while pos < len(text):
            for length in range(min(self._max_len, len(text) - pos), 0, -1):
                piece = text[pos:pos + length]
                if piece in self._ids:
                    ids.append(self._ids[piece])
                    spans.append((pos, pos + length))
                    pos += length
                    break
            else:
                raise TokenizerError(f"no vocabulary entry matches at {text[pos:pos + 8]!r}")
        return ids, spans

    def decode(self, ids: Sequence[int]) -> str:
        return "".join(self._tokens[i] for i in ids)


def align(sample: ContextSample, tok: Tokenizer, L: int) -> TokenPath:
    """Derive the word's token path from the tokenization of prefix+word.

    The last L tokens strictly before the word become the prefix (flagged
    short when the document start leaves fewer). The first word token may
    reach back over whitespace only; reaching over any non-whitespace
    prefix character is a boundary merge and rejects the sample.
    """
    if L < 1:
        raise ValidationError(f"L must be >= 1 (got {L})")
    full = sample.prefix_text + sample.surface
    w0 = len(sample.prefix_text)
    ids, spans = tok.encode_with_offsets(full)

    first = None
    for i, (_, end) in enumerate(zip(ids, spans)):
        if end[1] > w0:
            first = i
            break
    if first is None:
        raise AlignmentError(f"word {sample.word!r} produced no tokens")

    start_char = spans[first][0]
    if start_char < w0:
        fused = full[start_char:w0]
        if fused.strip():
            raise AlignmentError(
                f"token covering the start of {sample.word!r} also covers {fused!r}"
            )

    word_tokens = tuple(ids[first:])
    prefix_tokens = tuple(ids[max(0, first - L):first])
    return TokenPath(
        prefix_tokens=prefix_tokens,
        word_tokens=word_tokens,
        word=sample.word,
        n_word_tokens=len(word_tokens),
        short_prefix=first < L,
    )
