"""Shared builders for synthetic audit records and random distributions."""

from __future__ import annotations

import random

import numpy as np
import pytest

from wcs_audit.audit import AuditRecord, StepRecord
from wcs_audit.sampling import StepStats, TempStats, compute_step_stats

TEMPS = (0.7, 1.0, 1.5)


def make_step(
    step_index: int,
    rank: int,
    p_target: float,
    p_max: float,
    cum_excl: float,
    *,
    token_id: int = 0,
    temps: tuple[float, ...] = TEMPS,
) -> StepRecord:
    """A StepRecord carrying the same statistics at every temperature."""
    per_t = {t: TempStats(p_target=p_target, p_max=p_max, cum_excl=cum_excl) for t in temps}
    return StepRecord(
        step_index=step_index,
        token_id=token_id,
        stats=StepStats(rank=rank, per_temperature=per_t),
    )


PASS_STEP = dict(rank=2, p_target=0.3, p_max=0.5, cum_excl=0.5)
FAIL_K_ONLY = dict(rank=21, p_target=0.001, p_max=0.6, cum_excl=0.75)
FAIL_P_ONLY = dict(rank=5, p_target=0.01, p_max=0.3, cum_excl=0.85)
FAIL_BOTH = dict(rank=40, p_target=0.0001, p_max=0.7, cum_excl=0.97)


def make_record(
    word: str,
    context_id: int,
    step_specs: list[dict],
    *,
    rank_in_band: int = 0,
    doc_id: str = "doc",
    temps: tuple[float, ...] = TEMPS,
) -> AuditRecord:
    steps = tuple(
        make_step(i, token_id=i, temps=temps, **spec) for i, spec in enumerate(step_specs)
    )
    return AuditRecord(
        word=word,
        rank_in_band=rank_in_band,
        context_id=context_id,
        doc_id=doc_id,
        n_word_tokens=len(steps),
        steps=steps,
    )


def random_stats(rng: random.Random, vocab: int, temps=TEMPS) -> StepStats:
    """StepStats from a random softmaxed logit vector (invariants hold by
    construction)."""
    logits = [rng.uniform(-6.0, 6.0) for _ in range(vocab)]
    arr = np.asarray(logits)
    probs = {}
    for t in temps:
        z = np.exp((arr - arr.max()) / t)
        probs[t] = z / z.sum()
    target = rng.randrange(vocab)
    return compute_step_stats(probs, target)


def random_records(
    rng: random.Random,
    n_words: int,
    max_contexts: int,
    max_steps: int,
    vocab: int = 12,
) -> list[AuditRecord]:
    records = []
    for w in range(n_words):
        word = f"w{w:03d}"
        for c in range(rng.randint(1, max_contexts)):
            n_steps = rng.randint(1, max_steps)
            steps = tuple(
                StepRecord(step_index=i, token_id=i, stats=random_stats(rng, vocab))
                for i in range(n_steps)
            )
            records.append(
                AuditRecord(
                    word=word,
                    rank_in_band=10000 + w,
                    context_id=c,
                    doc_id="doc",
                    n_word_tokens=n_steps,
                    steps=steps,
                )
            )
    return records


@pytest.fixture
def rng() -> random.Random:
    return random.Random(1234)
