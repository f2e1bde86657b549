"""Forced-path statistics extraction from a causal language model.

For every context the word's token path is aligned against the tokenized
prefix, the model is run once over prefix + word (teacher forcing), and
each word token's step gets its sufficient statistics: the token's rank
under the reference ordering and, per temperature, its probability, the
maximum probability, and the probability mass ranked strictly ahead of it.

The softmax over the full vocabulary is computed in 32-bit (as the model
produced the logits) and then renormalized and accumulated in 64-bit, so
the written cumulative masses are stable enough for strict downstream
validation. Ranks are computed once at the lowest configured temperature
and asserted identical at the others.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BoundaryMergeError, ExtractionError, RankMismatchError
from .job import Context, ExtractionJob, load_target_ranks, read_contexts

log = logging.getLogger("wcs_extractor")


# ---------------------------------------------------------------------------
# alignment

def align_word(tokenizer, prefix_text: str, surface: str, prefix_tokens: int) -> tuple[list[int], list[int]]:
    """Split the tokenization of prefix + surface at the word boundary.

    The word's tokens are all tokens whose span reaches past the end of
    the prefix; the first of them may start earlier only if the skipped
    characters are whitespace (tokenizers that glue a leading space onto
    the word are fine, tokenizers that fuse it with preceding letters are
    not). Returns (prefix token ids, word token ids) where the prefix is
    trimmed to its last ``prefix_tokens`` tokens.
    """
    full = prefix_text + surface
    w0 = len(prefix_text)
    enc = tokenizer(full, add_special_tokens=False, return_offsets_mapping=True)
    ids = list(enc["input_ids"])
    spans = list(enc["offset_mapping"])
    first = next((i for i, (_, end) in enumerate(spans) if end > w0), None)
    if first is None:
        raise ExtractionError(f"no token covers the word in {full[-40:]!r}")
    start = spans[first][0]
    if start < w0 and full[start:w0].strip():
        raise BoundaryMergeError(
            f"first word token fuses with preceding text {full[start:w0]!r}"
        )
    word_ids = ids[first:]
    prefix_ids = ids[max(0, first - prefix_tokens):first]
    return prefix_ids, word_ids


def _render_prefix(tokenizer, prefix_text: str, apply_chat_template: bool) -> str:
    if not apply_chat_template:
        return prefix_text
    try:
        return tokenizer.apply_chat_template(
            [{"role": "user", "content": prefix_text}],
            tokenize=False,
            add_generation_prompt=True,
        )
    except (ValueError, AttributeError) as exc:
        raise ExtractionError(f"chat template requested but not usable: {exc}") from None


# ---------------------------------------------------------------------------
# per-step statistics

def step_statistics(
    logits: np.ndarray, target: int, temperatures: Sequence[float]
) -> tuple[int, dict[float, tuple[float, float, float]]]:
    """Sufficient statistics for one step from one row of logits.

    Returns (rank, {temperature: (p_target, p_max, cum_excl)}). The
    ordering (probability descending, token id ascending) is fixed at the
    lowest temperature and reused for every cumulative mass; the target's
    rank under each other temperature's own ordering must agree with it.
    """
    logits32 = np.asarray(logits, dtype=np.float32)
    if logits32.ndim != 1:
        raise ExtractionError(f"logits must be one-dimensional (got shape {logits32.shape})")
    if not 0 <= target < logits32.size:
        raise ExtractionError(f"target id {target} outside vocabulary of {logits32.size}")
    temps = sorted(temperatures)
    token_ids = np.arange(logits32.size)
    probs: dict[float, np.ndarray] = {}
    for t in temps:
        z = logits32 / np.float32(t)
        z = z - z.max()
        p = np.exp(z).astype(np.float64)
        probs[t] = p / p.sum()
    order = np.lexsort((token_ids, -probs[temps[0]]))
    pos = int(np.nonzero(order == target)[0][0])
    for t in temps[1:]:
        order_t = np.lexsort((token_ids, -probs[t]))
        pos_t = int(np.nonzero(order_t == target)[0][0])
        if pos_t != pos:
            raise RankMismatchError(
                f"rank {pos + 1} at T={temps[0]} but {pos_t + 1} at T={t}"
            )
    per_temp: dict[float, tuple[float, float, float]] = {}
    for t in temps:
        p = probs[t]
        cum_excl = float(np.cumsum(p[order])[pos - 1]) if pos > 0 else 0.0
        per_temp[t] = (float(p[target]), float(p.max()), cum_excl)
    return pos + 1, per_temp


# ---------------------------------------------------------------------------
# batched forward passes

def _forward(model, sequences: list[list[int]], device) -> list[np.ndarray]:
    """Score a right-padded batch; returns per-sample [len, vocab] float32 logits."""
    import torch

    max_len = max(len(s) for s in sequences)
    ids = torch.zeros((len(sequences), max_len), dtype=torch.long)
    mask = torch.zeros((len(sequences), max_len), dtype=torch.long)
    for i, seq in enumerate(sequences):
        ids[i, : len(seq)] = torch.tensor(seq, dtype=torch.long)
        mask[i, : len(seq)] = 1
    with torch.no_grad():
        out = model(input_ids=ids.to(device), attention_mask=mask.to(device))
    logits = out.logits.float().cpu().numpy()
    return [logits[i, : len(seq)] for i, seq in enumerate(sequences)]


def _is_oom(exc: BaseException) -> bool:
    return isinstance(exc, RuntimeError) and "out of memory" in str(exc).lower()


def _forward_with_retry(model, sequences: list[list[int]], device) -> list[np.ndarray]:
    """One out-of-memory failure halves the batch; a second one is fatal."""
    try:
        return _forward(model, sequences, device)
    except RuntimeError as exc:
        if not _is_oom(exc) or len(sequences) == 1:
            raise
        mid = (len(sequences) + 1) // 2
        log.warning("out of memory on a batch of %d; retrying in halves", len(sequences))
        try:
            return _forward(model, sequences[:mid], device) + _forward(model, sequences[mid:], device)
        except RuntimeError as exc2:
            if _is_oom(exc2):
                raise ExtractionError("out of memory even after halving the batch") from None
            raise


# ---------------------------------------------------------------------------
# the extraction run

@dataclass(frozen=True)
class SkippedContext:
    word: str
    context_id: int
    reason: str


@dataclass(frozen=True)
class ExtractionSummary:
    out_path: str
    records_written: int
    skipped: tuple[SkippedContext, ...]


def _batches(items: list, size: int):
    for i in range(0, len(items), size):
        yield items[i : i + size]


def _load_model_and_tokenizer(job: ExtractionJob):
    import torch
    from transformers import AutoModelForCausalLM, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(job.model, use_fast=True)
    model = AutoModelForCausalLM.from_pretrained(job.model)
    model.eval()
    model.to(torch.device(job.device))
    return model, tokenizer


def _record_json(context: Context, rank_in_band: int, word_ids: list[int], steps: list[dict]) -> str:
    payload = {
        "word": context.word,
        "rank_in_band": rank_in_band,
        "context_id": context.context_id,
        "doc_id": context.doc_id,
        "n_word_tokens": len(word_ids),
        "steps": steps,
    }
    return json.dumps(payload, ensure_ascii=False)


def extract(job: ExtractionJob, model=None, tokenizer=None) -> ExtractionSummary:
    """Run the job and write the trace; returns a summary of what happened.

    ``model`` and ``tokenizer`` may be passed directly (already loaded);
    otherwise both are loaded from ``job.model``. Contexts whose word
    cannot be cleanly aligned (boundary merge, empty usable prefix) are
    skipped and logged, everything else is fatal. The output file is
    written once, front to back: a metadata header line, then one record
    per surviving context in input order.
    """
    contexts = read_contexts(job.contexts_path)
    ranks = load_target_ranks(job.targets_path) if job.targets_path else {}
    if contexts:
        if model is None or tokenizer is None:
            model, tokenizer = _load_model_and_tokenizer(job)
        if not getattr(tokenizer, "is_fast", False):
            raise ExtractionError("a fast tokenizer is required for offset alignment")

    meta = {
        "model": job.model,
        "temperatures": list(job.temperatures),
        "prefix_tokens": job.prefix_tokens,
        "chat_template": "user-turn" if job.apply_chat_template else "none",
    }
    written = 0
    skipped: list[SkippedContext] = []
    with open(job.out_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"meta": meta}, ensure_ascii=False) + "\n")
        for batch in _batches(contexts, job.batch_size):
            prepared: list[tuple[Context, list[int], list[int]]] = []
            for ctx in batch:
                prefix_text = _render_prefix(tokenizer, ctx.prefix_text, job.apply_chat_template)
                try:
                    prefix_ids, word_ids = align_word(
                        tokenizer, prefix_text, ctx.surface, job.prefix_tokens
                    )
                except BoundaryMergeError as exc:
                    skipped.append(SkippedContext(ctx.word, ctx.context_id, str(exc)))
                    log.warning("skipping %r context %d: %s", ctx.word, ctx.context_id, exc)
                    continue
                if not prefix_ids:
                    reason = "no prefix tokens remain before the word"
                    skipped.append(SkippedContext(ctx.word, ctx.context_id, reason))
                    log.warning("skipping %r context %d: %s", ctx.word, ctx.context_id, reason)
                    continue
                prepared.append((ctx, prefix_ids, word_ids))
            if not prepared:
                continue
            vocab = getattr(getattr(model, "config", None), "vocab_size", None)
            if vocab is not None:
                for ctx, prefix_ids, word_ids in prepared:
                    worst = max(prefix_ids + word_ids)
                    if worst >= vocab:
                        raise ExtractionError(
                            f"token id {worst} from the tokenizer exceeds the model "
                            f"vocabulary of {vocab}; mismatched model and tokenizer?"
                        )
            rows = _forward_with_retry(model, [p + w for _, p, w in prepared], job.device)
            for (ctx, prefix_ids, word_ids), logits in zip(prepared, rows):
                steps = []
                for i, token_id in enumerate(word_ids):
                    row = logits[len(prefix_ids) + i - 1]
                    try:
                        rank, per_temp = step_statistics(row, token_id, job.temperatures)
                    except RankMismatchError as exc:
                        raise RankMismatchError(
                            f"word {ctx.word!r} context {ctx.context_id} step {i}: {exc}"
                        ) from None
                    steps.append(
                        {
                            "step_index": i,
                            "token_id": int(token_id),
                            "rank": rank,
                            "temps": {
                                repr(t): {
                                    "p_target": per_temp[t][0],
                                    "p_max": per_temp[t][1],
                                    "cum_excl": per_temp[t][2],
                                }
                                for t in job.temperatures
                            },
                        }
                    )
                fh.write(_record_json(ctx, ranks.get(ctx.word, 0), word_ids, steps) + "\n")
                written += 1
    log.info(
        "extracted %d records (%d skipped) -> %s", written, len(skipped), job.out_path
    )
    return ExtractionSummary(
        out_path=str(job.out_path), records_written=written, skipped=tuple(skipped)
    )
