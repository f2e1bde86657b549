"""Aggregation of audit records into coverage scores, sweeps and reports.

All headline quantities are ratios of integer counts, computed as a single
division so a fixture with 144 reachable trials out of 1000 reports exactly
0.144. The per-word and global views are tied by an exact identity: the
context-count-weighted mean of per-word scores equals the global score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .audit import AuditRecord, reachability
from .errors import UndefinedCorrelationError, ValidationError
from .lexicon import LexEntry
from .sampling import FilterConfig


@dataclass(frozen=True)
class SweepPoint:
    """Aggregate outcome of one filter configuration over a record set."""

    cfg: FilterConfig
    wcs: float
    erased_fraction: float
    words_reachable: float
    n_trials: int


@dataclass(frozen=True)
class WordScore:
    word: str
    cfg: FilterConfig
    wcs_w: float
    n_contexts: int


def _reach_counts(records: Sequence[AuditRecord], cfg: FilterConfig):
    """Per-word (n_reachable, n_contexts) counts, keyed in first-seen order."""
    counts: dict[str, list[int]] = {}
    for record in records:
        bucket = counts.setdefault(record.word, [0, 0])
        bucket[0] += 1 if reachability(record, cfg) else 0
        bucket[1] += 1
    return counts


def wcs(records: Sequence[AuditRecord], cfg: FilterConfig) -> SweepPoint:
    """Global mean reachability plus word-level reachable/erased fractions.

    A word counts as reachable when ANY of its contexts is reachable, and
    as erased when none is. Each fraction is one integer division.
    """
    if not records:
        raise ValidationError("no records to score")
    counts = _reach_counts(records, cfg)
    n_trials = sum(n for _, n in counts.values())
    n_hits = sum(r for r, _ in counts.values())
    n_words = len(counts)
    n_words_reachable = sum(1 for r, _ in counts.values() if r > 0)
    return SweepPoint(
        cfg=cfg,
        wcs=n_hits / n_trials,
        erased_fraction=(n_words - n_words_reachable) / n_words,
        words_reachable=n_words_reachable / n_words,
        n_trials=n_trials,
    )


def wcs_per_word(records: Sequence[AuditRecord], cfg: FilterConfig) -> list[WordScore]:
    if not records:
        raise ValidationError("no records to score")
    counts = _reach_counts(records, cfg)
    return [
        WordScore(word=w, cfg=cfg, wcs_w=r / n, n_contexts=n)
        for w, (r, n) in counts.items()
    ]


def sweep(records: Sequence[AuditRecord], configs: Sequence[FilterConfig]) -> list[SweepPoint]:
    """One SweepPoint per configuration, preserving input order."""
    return [wcs(records, cfg) for cfg in configs]


def mean_word_reachability(
    records: Sequence[AuditRecord], configs: Sequence[FilterConfig]
) -> list[tuple[str, float]]:
    """Per word, the mean of wcs_w across every supplied configuration."""
    if not configs:
        raise ValidationError("no configurations supplied")
    sums: dict[str, float] = {}
    for cfg in configs:
        for score in wcs_per_word(records, cfg):
            sums[score.word] = sums.get(score.word, 0.0) + score.wcs_w
    return [(w, s / len(configs)) for w, s in sums.items()]


def pearson_log_freq(
    word_means: Sequence[tuple[str, float]], lex: Sequence[LexEntry]
) -> float:
    """Pearson correlation between ln(frequency count) and mean word score."""
    counts = {e.word: e.count for e in lex}
    xs = []
    ys = []
    for word, mean in word_means:
        if word not in counts:
            raise ValidationError(f"word {word!r} missing from the frequency list")
        if counts[word] <= 0:
            raise ValidationError(f"word {word!r} has non-positive count")
        xs.append(math.log(counts[word]))
        ys.append(float(mean))
    if len(xs) < 2:
        raise UndefinedCorrelationError(
            f"correlation needs at least 2 points (got {len(xs)})"
        )
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelationError("zero variance in one of the variables")
    return float(np.dot(dx, dy)) / math.sqrt(sxx * syy)


# ---------------------------------------------------------------------------
# CSV emission

SWEEP_CSV_HEADER = "sampler,param,temperature,wcs,words_reachable,erased_fraction,n_trials"
PER_WORD_CSV_HEADER = "word,rank,sampler,param,temperature,wcs_w,n_contexts"


def sweep_csv_lines(points: Iterable[SweepPoint]) -> list[str]:
    lines = [SWEEP_CSV_HEADER]
    for pt in points:
        lines.append(
            ",".join(
                [
                    pt.cfg.sampler_label(),
                    pt.cfg.param_label(),
                    repr(pt.cfg.temperature),
                    repr(pt.wcs),
                    repr(pt.words_reachable),
                    repr(pt.erased_fraction),
                    str(pt.n_trials),
                ]
            )
        )
    return lines


def per_word_csv_lines(
    scores: Iterable[WordScore], ranks: Mapping[str, int]
) -> list[str]:
    lines = [PER_WORD_CSV_HEADER]
    for s in scores:
        lines.append(
            ",".join(
                [
                    s.word,
                    str(ranks.get(s.word, 0)),
                    s.cfg.sampler_label(),
                    s.cfg.param_label(),
                    repr(s.cfg.temperature),
                    repr(s.wcs_w),
                    str(s.n_contexts),
                ]
            )
        )
    return lines


def write_csv(lines: Sequence[str], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def word_ranks(records: Sequence[AuditRecord]) -> dict[str, int]:
    ranks: dict[str, int] = {}
    for record in records:
        ranks.setdefault(record.word, record.rank_in_band)
    return ranks
