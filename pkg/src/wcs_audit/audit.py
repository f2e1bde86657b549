"""Forced-path audit: walk a word's token path and record step statistics.

The audit never samples. For each token of the word it asks an oracle for
the next-token distribution given everything before that token, records the
sufficient statistics, then forces the true token and continues. A word is
reachable under a filter configuration iff every step survives it.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from .errors import (
    AuditStepError,
    OracleError,
    ReplayMissError,
    TraceSchemaError,
    ValidationError,
    VocabularyMismatchError,
)
from .sampling import (
    FilterConfig,
    StepStats,
    TempStats,
    compute_step_stats,
    softmax_at_temperature,
    survives,
)
from .tokenizers import TokenPath


class StepOracle(Protocol):
    """Anything that can score the next token given a token prefix."""

    @property
    def vocab_size(self) -> int: ...

    def next_logits(self, prefix: Sequence[int]) -> np.ndarray: ...


@dataclass(frozen=True)
class StepRecord:
    step_index: int
    token_id: int
    stats: StepStats


@dataclass(frozen=True)
class AuditRecord:
    """One (word, context) audit: the full forced path, step by step."""

    word: str
    rank_in_band: int
    context_id: int
    doc_id: str
    n_word_tokens: int
    steps: tuple[StepRecord, ...]

    def temperatures(self) -> list[float]:
        return self.steps[0].stats.temperatures() if self.steps else []


def audit_word_context(
    path: TokenPath,
    oracle: StepOracle,
    temperatures: Sequence[float],
    *,
    rank_in_band: int = 0,
    context_id: int = 0,
    doc_id: str = "",
) -> AuditRecord:
    """Traverse the word's token path, one oracle query per word token.

    The query count equals n_word_tokens whether or not any filter would
    have kept the path alive; survival is decided afterwards, offline.
    """
    if not temperatures:
        raise ValidationError("need at least one temperature")
    if not path.word_tokens:
        raise ValidationError(f"word {path.word!r} has an empty token path")
    temps = sorted(set(float(t) for t in temperatures))
    oov = [t for t in (*path.prefix_tokens, *path.word_tokens) if not 0 <= t < oracle.vocab_size]
    if oov:
        raise VocabularyMismatchError(
            f"word {path.word!r}: token ids {oov[:5]} outside oracle vocabulary "
            f"of {oracle.vocab_size}"
        )
    prefix = list(path.prefix_tokens)
    steps = []
    for i, token_id in enumerate(path.word_tokens):
        try:
            logits = np.asarray(oracle.next_logits(prefix), dtype=np.float64)
        except OracleError:
            raise
        except Exception as exc:
            raise AuditStepError(path.word, context_id, i, exc) from exc
        if logits.ndim != 1 or logits.size != oracle.vocab_size:
            raise AuditStepError(
                path.word,
                context_id,
                i,
                ValidationError(
                    f"oracle returned shape {logits.shape}, expected ({oracle.vocab_size},)"
                ),
            )
        probs = {t: softmax_at_temperature(logits, t) for t in temps}
        stats = compute_step_stats(probs, int(token_id))
        steps.append(StepRecord(step_index=i, token_id=int(token_id), stats=stats))
        prefix.append(int(token_id))
    return AuditRecord(
        word=path.word,
        rank_in_band=rank_in_band,
        context_id=context_id,
        doc_id=doc_id,
        n_word_tokens=len(steps),
        steps=tuple(steps),
    )


def reachability(record: AuditRecord, cfg: FilterConfig) -> bool:
    """True iff every step of the forced path survives the configuration."""
    return all(survives(step.stats, cfg) for step in record.steps)


# ---------------------------------------------------------------------------
# n-gram oracle


class NgramOracle:
    """Add-alpha smoothed n-gram scorer with longest-context backoff.

    Counts are kept for every context length from 0 to order-1; a query uses
    the longest suffix of the prefix that was seen during fitting (the empty
    context always qualifies, so every query is answerable).
    """

    def __init__(self, order: int, vocab_size: int, alpha: float = 0.1):
        if order < 1:
            raise ValidationError(f"order must be >= 1 (got {order})")
        if vocab_size < 1:
            raise ValidationError(f"vocab_size must be >= 1 (got {vocab_size})")
        if not (alpha > 0):
            raise ValidationError(f"alpha must be > 0 (got {alpha})")
        self.order = order
        self._vocab_size = vocab_size
        self.alpha = alpha
        self._counts: dict[tuple[int, ...], Counter] = {}
        self._totals: dict[tuple[int, ...], int] = {}

    @property
    def vocab_size(self) -> int:
        return self._vocab_size

    def fit(self, sequences: Iterable[Sequence[int]]) -> "NgramOracle":
        for seq in sequences:
            ids = list(seq)
            for i, tok in enumerate(ids):
                for ctx_len in range(min(i, self.order - 1) + 1):
                    ctx = tuple(ids[i - ctx_len : i])
                    bucket = self._counts.get(ctx)
                    if bucket is None:
                        bucket = Counter()
                        self._counts[ctx] = bucket
                    bucket[tok] += 1
                    self._totals[ctx] = self._totals.get(ctx, 0) + 1
        if () not in self._counts:
            raise OracleError("no training tokens seen")
        return self

    def _context_for(self, prefix: Sequence[int]) -> tuple[int, ...]:
        tail = tuple(int(t) for t in prefix[max(0, len(prefix) - (self.order - 1)) :])
        while tail and tail not in self._counts:
            tail = tail[1:]
        return tail

    def next_probs(self, prefix: Sequence[int]) -> np.ndarray:
        ctx = self._context_for(prefix)
        bucket = self._counts[ctx]
        total = self._totals[ctx]
        denom = total + self.alpha * self._vocab_size
        probs = np.full(self._vocab_size, self.alpha / denom, dtype=np.float64)
        for tok, c in bucket.items():
            probs[tok] = (c + self.alpha) / denom
        return probs

    def next_logits(self, prefix: Sequence[int]) -> np.ndarray:
        return np.log(self.next_probs(prefix))


def build_ngram_oracle(
    token_sequences: Iterable[Sequence[int]],
    vocab_size: int,
    order: int = 3,
    alpha: float = 0.1,
) -> NgramOracle:
    return NgramOracle(order=order, vocab_size=vocab_size, alpha=alpha).fit(token_sequences)


# ---------------------------------------------------------------------------
# trace serialization

_STEP_KEYS = {"step_index", "token_id", "rank", "temps"}
_RECORD_KEYS = {"word", "rank_in_band", "context_id", "doc_id", "n_word_tokens", "steps"}
_TEMP_FIELDS = ("p_target", "p_max", "cum_excl")


def _temp_key(t: float) -> str:
    return repr(float(t))


def record_to_json(record: AuditRecord) -> str:
    steps = []
    for step in record.steps:
        temps = {}
        for t in sorted(step.stats.per_temperature):
            ts = step.stats.per_temperature[t]
            temps[_temp_key(t)] = {
                "p_target": ts.p_target,
                "p_max": ts.p_max,
                "cum_excl": ts.cum_excl,
            }
        steps.append(
            {
                "step_index": step.step_index,
                "token_id": step.token_id,
                "rank": step.stats.rank,
                "temps": temps,
            }
        )
    payload = {
        "word": record.word,
        "rank_in_band": record.rank_in_band,
        "context_id": record.context_id,
        "doc_id": record.doc_id,
        "n_word_tokens": record.n_word_tokens,
        "steps": steps,
    }
    return json.dumps(payload, ensure_ascii=False)


def write_trace(records: Iterable[AuditRecord], path: str, meta: dict | None = None) -> int:
    """Write records as JSONL, optionally preceded by a one-line meta header."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        if meta is not None:
            fh.write(json.dumps({"meta": meta}, ensure_ascii=False) + "\n")
        for record in records:
            fh.write(record_to_json(record) + "\n")
            n += 1
    return n


class TraceOracle:
    """Replay oracle serving precomputed step statistics from a trace file.

    Keys are (word, context_id, step_index); a miss raises rather than
    guessing, so replay either reproduces the original audit exactly or
    fails loudly.
    """

    def __init__(self, records: Sequence[AuditRecord], meta: dict, path: str):
        self.path = path
        self.meta = meta
        self.records = list(records)
        self._by_key: dict[tuple[str, int, int], StepStats] = {}
        self._by_record: dict[tuple[str, int], AuditRecord] = {}
        for record in self.records:
            self._by_record[(record.word, record.context_id)] = record
            for step in record.steps:
                self._by_key[(record.word, record.context_id, step.step_index)] = step.stats

    def step_stats(self, word: str, context_id: int, step_index: int) -> StepStats:
        try:
            return self._by_key[(word, context_id, step_index)]
        except KeyError:
            raise ReplayMissError(
                f"no recorded step for word={word!r} context_id={context_id} "
                f"step_index={step_index} in {self.path}"
            ) from None

    def replay(self, word: str, context_id: int) -> AuditRecord:
        try:
            return self._by_record[(word, context_id)]
        except KeyError:
            raise ReplayMissError(
                f"no recorded trial for word={word!r} context_id={context_id} in {self.path}"
            ) from None


def build_trace_oracle(trace_path: str) -> TraceOracle:
    records, meta = load_trace(trace_path)
    return TraceOracle(records, meta, trace_path)


def _require(cond: bool, path: str, line_no: int, msg: str) -> None:
    if not cond:
        raise TraceSchemaError(path, line_no, msg)


def _parse_step(obj: dict, path: str, line_no: int, idx: int) -> StepRecord:
    _require(isinstance(obj, dict), path, line_no, f"step {idx} is not an object")
    missing = _STEP_KEYS - obj.keys()
    _require(not missing, path, line_no, f"step {idx} missing keys {sorted(missing)}")
    _require(
        isinstance(obj["step_index"], int) and not isinstance(obj["step_index"], bool),
        path,
        line_no,
        f"step {idx}: step_index must be an integer",
    )
    _require(
        obj["step_index"] == idx,
        path,
        line_no,
        f"step {idx}: step_index {obj['step_index']} out of order",
    )
    _require(
        isinstance(obj["token_id"], int) and not isinstance(obj["token_id"], bool),
        path,
        line_no,
        f"step {idx}: token_id must be an integer",
    )
    rank = obj["rank"]
    _require(
        isinstance(rank, int) and not isinstance(rank, bool) and rank >= 1,
        path,
        line_no,
        f"step {idx}: rank must be an integer >= 1",
    )
    temps_obj = obj["temps"]
    _require(
        isinstance(temps_obj, dict) and temps_obj,
        path,
        line_no,
        f"step {idx}: temps must be a non-empty object",
    )
    per_t: dict[float, TempStats] = {}
    for key, fields in temps_obj.items():
        try:
            t = float(key)
        except ValueError:
            raise TraceSchemaError(path, line_no, f"step {idx}: bad temperature key {key!r}")
        _require(t > 0, path, line_no, f"step {idx}: temperature {key} must be > 0")
        _require(
            isinstance(fields, dict) and set(fields) == set(_TEMP_FIELDS),
            path,
            line_no,
            f"step {idx}: temps[{key}] must have exactly {list(_TEMP_FIELDS)}",
        )
        vals = {}
        for name in _TEMP_FIELDS:
            v = fields[name]
            _require(
                isinstance(v, (int, float)) and not isinstance(v, bool),
                path,
                line_no,
                f"step {idx}: {name} at T={key} must be a number",
            )
            v = float(v)
            _require(
                0.0 <= v <= 1.0 and not math.isnan(v),
                path,
                line_no,
                f"step {idx}: {name}={v!r} at T={key} outside [0, 1]",
            )
            vals[name] = v
        _require(
            vals["p_target"] <= vals["p_max"] + 1e-12,
            path,
            line_no,
            f"step {idx}: p_target exceeds p_max at T={key}",
        )
        _require(
            vals["cum_excl"] + vals["p_target"] <= 1.0 + 1e-9,
            path,
            line_no,
            f"step {idx}: cum_excl + p_target exceeds 1 at T={key}",
        )
        if rank == 1:
            _require(
                vals["cum_excl"] <= 1e-12,
                path,
                line_no,
                f"step {idx}: rank 1 with nonzero cum_excl at T={key}",
            )
            _require(
                abs(vals["p_target"] - vals["p_max"]) <= 1e-9,
                path,
                line_no,
                f"step {idx}: rank 1 with p_target != p_max at T={key}",
            )
        per_t[t] = TempStats(**vals)
    return StepRecord(
        step_index=idx,
        token_id=obj["token_id"],
        stats=StepStats(rank=rank, per_temperature=per_t),
    )


def load_trace(path: str) -> tuple[list[AuditRecord], dict]:
    """Strictly parse a trace file; returns (records, meta).

    Every structural or numeric violation raises TraceSchemaError with the
    offending line number. An optional single meta header line is tolerated
    only as the first line.
    """
    records: list[AuditRecord] = []
    meta: dict = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceSchemaError(path, line_no, f"invalid JSON: {exc}") from None
            _require(isinstance(obj, dict), path, line_no, "line is not a JSON object")
            if "meta" in obj and line_no == 1 and set(obj) == {"meta"}:
                _require(isinstance(obj["meta"], dict), path, line_no, "meta must be an object")
                meta = obj["meta"]
                continue
            missing = _RECORD_KEYS - obj.keys()
            _require(not missing, path, line_no, f"missing keys {sorted(missing)}")
            extra = obj.keys() - _RECORD_KEYS
            _require(not extra, path, line_no, f"unknown keys {sorted(extra)}")
            _require(
                isinstance(obj["word"], str) and obj["word"],
                path,
                line_no,
                "word must be a non-empty string",
            )
            for key in ("rank_in_band", "context_id", "n_word_tokens"):
                _require(
                    isinstance(obj[key], int) and not isinstance(obj[key], bool),
                    path,
                    line_no,
                    f"{key} must be an integer",
                )
            _require(isinstance(obj["doc_id"], str), path, line_no, "doc_id must be a string")
            steps_obj = obj["steps"]
            _require(
                isinstance(steps_obj, list) and steps_obj,
                path,
                line_no,
                "steps must be a non-empty array",
            )
            _require(
                obj["n_word_tokens"] == len(steps_obj),
                path,
                line_no,
                f"n_word_tokens {obj['n_word_tokens']} != {len(steps_obj)} steps",
            )
            steps = tuple(
                _parse_step(s, path, line_no, i) for i, s in enumerate(steps_obj)
            )
            temp_sets = {frozenset(s.stats.per_temperature) for s in steps}
            _require(
                len(temp_sets) == 1,
                path,
                line_no,
                "steps disagree on the recorded temperature set",
            )
            records.append(
                AuditRecord(
                    word=obj["word"],
                    rank_in_band=obj["rank_in_band"],
                    context_id=obj["context_id"],
                    doc_id=obj["doc_id"],
                    n_word_tokens=obj["n_word_tokens"],
                    steps=steps,
                )
            )
    return records, meta
