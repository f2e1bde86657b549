"""Temperature scaling, per-step sufficient statistics, and survival rules.

Each audited token step is reduced to four numbers per temperature: the
target's rank under a deterministic ordering, its probability, the maximum
probability, and the probability mass strictly ahead of it. Those are
exactly sufficient to decide survival under top-k, nucleus and min-p
truncation for any parameter value, so a single forward pass supports an
entire sweep offline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import TemperatureError, ValidationError

NORMALIZATION_TOL = 1e-6
MASS_EPSILON = 1e-9
_KAHAN_THRESHOLD = 100_000


@dataclass(frozen=True)
class TempStats:
    """Target/max probabilities and excluded prefix mass at one temperature."""

    p_target: float
    p_max: float
    cum_excl: float


@dataclass(frozen=True)
class StepStats:
    """Rank (temperature-invariant) plus per-temperature probabilities."""

    rank: int
    per_temperature: Mapping[float, TempStats]

    def at(self, temperature: float) -> TempStats:
        try:
            return self.per_temperature[temperature]
        except KeyError:
            have = sorted(self.per_temperature)
            raise TemperatureError(
                f"temperature {temperature} not recorded (have {have})"
            ) from None

    def temperatures(self) -> list[float]:
        return sorted(self.per_temperature)


@dataclass(frozen=True)
class FilterConfig:
    """A sampler configuration: temperature plus any subset of {k, p, m}.

    All set filters apply conjunctively, matching generation stacks that
    chain truncations before sampling.
    """

    temperature: float
    k: int | None = None
    p: float | None = None
    m: float | None = None

    def __post_init__(self):
        if not (self.temperature > 0):
            raise ValidationError(f"temperature must be > 0 (got {self.temperature})")
        if self.k is None and self.p is None and self.m is None:
            raise ValidationError("at least one of k, p, m must be set")
        if self.k is not None and self.k < 1:
            raise ValidationError(f"k must be >= 1 (got {self.k})")
        if self.p is not None and not (0 < self.p <= 1):
            raise ValidationError(f"p must be in (0, 1] (got {self.p})")
        if self.m is not None and not (0 <= self.m < 1):
            raise ValidationError(f"m must be in [0, 1) (got {self.m})")

    def sampler_label(self) -> str:
        parts = []
        if self.p is not None:
            parts.append("top_p")
        if self.k is not None:
            parts.append("top_k")
        if self.m is not None:
            parts.append("min_p")
        return "+".join(parts)

    def param_label(self) -> str:
        parts = []
        if self.p is not None:
            parts.append(repr(self.p))
        if self.k is not None:
            parts.append(str(self.k))
        if self.m is not None:
            parts.append(repr(self.m))
        return "+".join(parts)


def softmax_at_temperature(logits: Sequence[float], temperature: float) -> np.ndarray:
    """Temperature-scaled softmax with max subtraction for overflow safety."""
    if not (temperature > 0):
        raise ValidationError(f"temperature must be > 0 (got {temperature})")
    arr = np.asarray(logits, dtype=np.float64)
    if arr.size == 0:
        raise ValidationError("logits must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("logits must be finite")
    z = (arr - arr.max()) / temperature
    e = np.exp(z)
    return e / e.sum()


def _prefix_sum(values: np.ndarray, upto: int) -> float:
    """Sequential sum of values[:upto]; Kahan-compensated for huge vocabularies."""
    if upto <= 0:
        return 0.0
    if upto <= _KAHAN_THRESHOLD:
        return float(np.cumsum(values[:upto])[-1]) if upto > 1 else float(values[0])
    total = 0.0
    comp = 0.0
    for v in values[:upto]:
        y = float(v) - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


def compute_step_stats(
    probs_by_temperature: Mapping[float, Sequence[float]],
    target_token: int,
    reference_temperature: float | None = None,
) -> StepStats:
    """Reduce full distributions at each temperature to step statistics.

    Tokens are ordered by probability at the reference temperature (the
    lowest supplied unless overridden), descending, with ascending token id
    breaking ties; that fixed order defines rank, the excluded mass and the
    maximum probability at every temperature.
    """
    if not probs_by_temperature:
        raise ValidationError("need at least one temperature")
    temps = sorted(probs_by_temperature)
    ref_t = reference_temperature if reference_temperature is not None else temps[0]
    if ref_t not in probs_by_temperature:
        raise TemperatureError(f"reference temperature {ref_t} not supplied")

    vectors = {}
    size = None
    for t in temps:
        v = np.asarray(probs_by_temperature[t], dtype=np.float64)
        if size is None:
            size = v.size
        elif v.size != size:
            raise ValidationError(
                f"probability vectors disagree in length ({v.size} vs {size})"
            )
        if abs(float(v.sum()) - 1.0) > NORMALIZATION_TOL:
            raise ValidationError(f"probabilities at T={t} sum to {float(v.sum())!r}, not 1")
        vectors[t] = v

    if not 0 <= target_token < size:
        raise ValidationError(f"target token {target_token} outside vocabulary of {size}")

    ref = vectors[ref_t]
    # lexsort: last key is primary
    order = np.lexsort((np.arange(size), -ref))
    position = int(np.nonzero(order == target_token)[0][0])
    rank = position + 1

    per_t = {}
    for t in temps:
        sorted_probs = vectors[t][order]
        per_t[t] = TempStats(
            p_target=float(vectors[t][target_token]),
            p_max=float(sorted_probs[0]),
            cum_excl=_prefix_sum(sorted_probs, position),
        )
    return StepStats(rank=rank, per_temperature=per_t)


def survives_top_k(stats: StepStats, k: int) -> bool:
    """Rank within the k most probable outcomes; temperature plays no role."""
    if k < 1:
        raise ValidationError(f"k must be >= 1 (got {k})")
    return stats.rank <= k


def survives_top_p(stats: StepStats, p: float, temperature: float) -> bool:
    """Membership in the smallest sorted prefix reaching cumulative mass p."""
    if not (0 < p <= 1):
        raise ValidationError(f"p must be in (0, 1] (got {p})")
    return stats.at(temperature).cum_excl < p


def survives_min_p(stats: StepStats, m: float, temperature: float) -> bool:
    """Probability at least m times the maximum (inclusive)."""
    if not (0 <= m < 1):
        raise ValidationError(f"m must be in [0, 1) (got {m})")
    ts = stats.at(temperature)
    return ts.p_target >= m * ts.p_max


def survives(stats: StepStats, cfg: FilterConfig) -> bool:
    """Conjunction of every configured filter at the config's temperature."""
    if cfg.k is not None and not survives_top_k(stats, cfg.k):
        return False
    if cfg.p is not None and not survives_top_p(stats, cfg.p, cfg.temperature):
        return False
    if cfg.m is not None and not survives_min_p(stats, cfg.m, cfg.temperature):
        return False
    # a config with only k set never touches per-temperature data, but the
    # temperature must still be recorded for the step to be meaningful
    if cfg.p is None and cfg.m is None:
        stats.at(cfg.temperature)
    return True


def validate_step_stats(stats: StepStats) -> list[str]:
    """Return invariant violations (empty when the step is consistent)."""
    problems = []
    if stats.rank < 1:
        problems.append(f"rank {stats.rank} < 1")
    for t, ts in sorted(stats.per_temperature.items()):
        for name, v in (("p_target", ts.p_target), ("p_max", ts.p_max), ("cum_excl", ts.cum_excl)):
            if not (0.0 <= v <= 1.0) or math.isnan(v):
                problems.append(f"T={t}: {name}={v!r} outside [0, 1]")
        if ts.p_target > ts.p_max + 1e-12:
            problems.append(f"T={t}: p_target {ts.p_target!r} > p_max {ts.p_max!r}")
        if ts.cum_excl + ts.p_target > 1.0 + MASS_EPSILON:
            problems.append(
                f"T={t}: cum_excl + p_target = {ts.cum_excl + ts.p_target!r} > 1 + 1e-9"
            )
        if stats.rank == 1:
            if ts.cum_excl > 1e-12:
                problems.append(f"T={t}: rank 1 but cum_excl = {ts.cum_excl!r}")
            if abs(ts.p_target - ts.p_max) > 1e-9:
                problems.append(f"T={t}: rank 1 but p_target != p_max")
    return problems
