"""Generate the bundled toy corpus, frequency list and dictionary.

Deterministic for a fixed seed; the outputs are committed under
tests/data/toy so tests and the README walkthrough never regenerate them.
Run from the repository root:

    python3 scripts/make_toy_data.py
"""

from __future__ import annotations

import argparse
import collections
import random
import re
from pathlib import Path

CONSONANTS = "bcdfghklmnprstvz"
VOWELS = "aeiou"


def invent_word(rng: random.Random, n_syllables: int) -> str:
    parts = []
    for _ in range(n_syllables):
        parts.append(rng.choice(CONSONANTS) + rng.choice(VOWELS))
        if rng.random() < 0.3:
            parts.append(rng.choice(CONSONANTS))
    return "".join(parts)


def build_vocab(rng: random.Random, size: int) -> list[str]:
    words = set()
    while len(words) < size:
        words.add(invent_word(rng, rng.randint(1, 4)))
    return sorted(words)


def zipf_weights(n: int, exponent: float = 1.05) -> list[float]:
    return [1.0 / (i + 1) ** exponent for i in range(n)]


def make_documents(rng: random.Random, vocab: list[str], n_docs: int, words_per_doc: int):
    weights = zipf_weights(len(vocab))
    docs = []
    for _ in range(n_docs):
        out = []
        sentence_len = 0
        target_len = rng.randint(6, 14)
        sentences_in_par = 0
        n = 0
        while n < words_per_doc:
            word = rng.choices(vocab, weights=weights, k=1)[0]
            if sentence_len == 0:
                word = word.capitalize()
            out.append(word)
            sentence_len += 1
            n += 1
            if sentence_len >= target_len:
                out[-1] = out[-1] + "."
                sentence_len = 0
                target_len = rng.randint(6, 14)
                sentences_in_par += 1
                if sentences_in_par >= rng.randint(5, 9):
                    out[-1] = out[-1] + "\n"
                    sentences_in_par = 0
        text = " ".join(out).replace("\n ", "\n")
        docs.append(text + "\n")
    return docs


def count_words(docs: list[str]) -> collections.Counter:
    counter: collections.Counter = collections.Counter()
    for text in docs:
        for run in re.findall(r"\S+", text):
            word = run.strip(".").lower()
            if word.isalpha():
                counter[word] += 1
    return counter


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--vocab-size", type=int, default=300)
    parser.add_argument("--n-docs", type=int, default=3)
    parser.add_argument("--words-per-doc", type=int, default=11000)
    parser.add_argument("--out", default="tests/data/toy")
    args = parser.parse_args()

    rng = random.Random(args.seed)
    vocab = build_vocab(rng, args.vocab_size)
    rng.shuffle(vocab)
    # one non-ASCII word so byte offsets and char offsets diverge in the data
    vocab.insert(rng.randrange(40, len(vocab)), "café")
    docs = make_documents(rng, vocab, args.n_docs, args.words_per_doc)

    out = Path(args.out)
    corpus_dir = out / "corpus"
    corpus_dir.mkdir(parents=True, exist_ok=True)
    for i, text in enumerate(docs):
        (corpus_dir / f"doc{i:02d}.txt").write_text(text, encoding="utf-8")

    counts = count_words(docs)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    with open(out / "frequency.tsv", "w", encoding="utf-8") as fh:
        for word, count in ranked:
            fh.write(f"{word}\t{count}\n")
    with open(out / "dictionary.txt", "w", encoding="utf-8") as fh:
        for word in sorted(counts):
            fh.write(word + "\n")

    total = sum(len(d.encode("utf-8")) for d in docs)
    print(f"{args.n_docs} docs, {total} bytes, {len(counts)} distinct words")


if __name__ == "__main__":
    main()
