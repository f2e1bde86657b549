"""Run configuration: defaults, flat key=value files, and flag overrides."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import Mapping

from .errors import ParseError, ValidationError
from .sampling import FilterConfig

# the combined filter evaluated alongside the single-parameter grids
DEFAULT_COMBINED_P = 0.8
DEFAULT_COMBINED_K = 20

DEFAULT_TOP_P_GRID = (0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 0.99)
DEFAULT_TOP_K_GRID = tuple(range(1, 21))
DEFAULT_MIN_P_GRID = (0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.1)
DEFAULT_TEMPERATURES = (0.7, 1.0, 1.5)


@dataclass(frozen=True)
class RunConfig:
    band_lo: int = 10000
    band_hi: int = 40000
    n_words: int = 100
    n_contexts: int = 10
    prefix_tokens: int = 256
    min_prefix_chars: int = 1024
    prefix_char_budget: int = 2048
    temperatures: tuple[float, ...] = DEFAULT_TEMPERATURES
    top_p_grid: tuple[float, ...] = DEFAULT_TOP_P_GRID
    top_k_grid: tuple[int, ...] = DEFAULT_TOP_K_GRID
    min_p_grid: tuple[float, ...] = DEFAULT_MIN_P_GRID
    seed: int = 0
    frequency_list: str = ""
    dictionary: str = ""
    corpus_dir: str = ""
    trace_in: str = ""
    trace_out: str = ""
    out_dir: str = "."

    def validate(self) -> None:
        if not (0 < self.band_lo <= self.band_hi):
            raise ValidationError(
                f"band must satisfy 0 < lo <= hi (got {self.band_lo}..{self.band_hi})"
            )
        if self.n_words < 0:
            raise ValidationError(f"n_words must be >= 0 (got {self.n_words})")
        if self.n_contexts < 1:
            raise ValidationError(f"n_contexts must be >= 1 (got {self.n_contexts})")
        if self.prefix_tokens < 1:
            raise ValidationError(f"prefix_tokens must be >= 1 (got {self.prefix_tokens})")
        if self.min_prefix_chars < 0:
            raise ValidationError("min_prefix_chars must be >= 0")
        if self.prefix_char_budget < 1:
            raise ValidationError("prefix_char_budget must be >= 1")
        if not self.temperatures or any(t <= 0 for t in self.temperatures):
            raise ValidationError(f"temperatures must be positive (got {self.temperatures})")
        if any(not 0 < p <= 1 for p in self.top_p_grid):
            raise ValidationError(f"top_p grid values must be in (0, 1] (got {self.top_p_grid})")
        if any(k < 1 for k in self.top_k_grid):
            raise ValidationError(f"top_k grid values must be >= 1 (got {self.top_k_grid})")
        if any(not 0 <= m < 1 for m in self.min_p_grid):
            raise ValidationError(f"min_p grid values must be in [0, 1) (got {self.min_p_grid})")
        if self.seed < 0:
            raise ValidationError(f"seed must be a non-negative integer (got {self.seed})")


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_INT_FIELDS = {
    "band_lo",
    "band_hi",
    "n_words",
    "n_contexts",
    "prefix_tokens",
    "min_prefix_chars",
    "prefix_char_budget",
    "seed",
}
_FLOAT_TUPLE_FIELDS = {"temperatures", "top_p_grid", "min_p_grid"}
_INT_TUPLE_FIELDS = {"top_k_grid"}
_STR_FIELDS = {"frequency_list", "dictionary", "corpus_dir", "trace_in", "trace_out", "out_dir"}


def _coerce(key: str, raw: str, path: str, line_no: int):
    try:
        if key in _INT_FIELDS:
            return int(raw)
        if key in _FLOAT_TUPLE_FIELDS:
            return tuple(float(part) for part in raw.split(",") if part.strip())
        if key in _INT_TUPLE_FIELDS:
            return tuple(int(part) for part in raw.split(",") if part.strip())
        return raw
    except ValueError as exc:
        raise ParseError(path, line_no, f"bad value for {key}: {exc}") from None


def load_config(path: str, base: RunConfig | None = None) -> RunConfig:
    """Parse a flat key=value file; '#' starts a comment, blank lines skipped."""
    cfg = base if base is not None else RunConfig()
    updates = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ParseError(path, line_no, f"expected key=value, got {stripped!r}")
            key, _, raw = stripped.partition("=")
            key = key.strip()
            raw = raw.strip()
            if key not in _FIELD_TYPES:
                raise ParseError(path, line_no, f"unknown key {key!r}")
            updates[key] = _coerce(key, raw, path, line_no)
    return replace(cfg, **updates)


def grid_configs(cfg: RunConfig) -> list[FilterConfig]:
    """The full sweep: per temperature, each single-parameter grid plus the
    combined top_p+top_k setting."""
    out = []
    for t in cfg.temperatures:
        out.extend(FilterConfig(temperature=t, p=p) for p in cfg.top_p_grid)
        out.extend(FilterConfig(temperature=t, k=k) for k in cfg.top_k_grid)
        out.extend(FilterConfig(temperature=t, m=m) for m in cfg.min_p_grid)
        out.append(FilterConfig(temperature=t, p=DEFAULT_COMBINED_P, k=DEFAULT_COMBINED_K))
    return out


def apply_overrides(cfg: RunConfig, overrides: Mapping[str, object]) -> RunConfig:
    """Apply CLI-sourced values on top of a config; flags always win."""
    updates = {k: v for k, v in overrides.items() if v is not None}
    unknown = set(updates) - set(_FIELD_TYPES)
    if unknown:
        raise ValidationError(f"unknown config fields: {sorted(unknown)}")
    return replace(cfg, **updates) if updates else cfg
