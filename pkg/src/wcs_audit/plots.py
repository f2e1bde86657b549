"""Static decay-curve plots, written as deterministic SVG files.

Matplotlib stamps SVG output with a creation date and hashed element ids;
both are pinned (date stripped, fixed hash salt) so reruns are
byte-identical and safe to diff.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import SweepPoint

_Y_LABEL = {"wcs": "WCS", "erased_fraction": "fraction of words erased"}
_X_LABEL = {"top_p": "p", "top_k": "k", "min_p": "m"}


def _param_value(pt: SweepPoint) -> float:
    cfg = pt.cfg
    if cfg.p is not None and cfg.k is None and cfg.m is None:
        return cfg.p
    if cfg.k is not None and cfg.p is None and cfg.m is None:
        return float(cfg.k)
    if cfg.m is not None and cfg.p is None and cfg.k is None:
        return cfg.m
    raise ValueError(f"not a single-parameter sweep point: {cfg}")


def plot_decay_curve(
    series: Mapping[str, Sequence[SweepPoint]],
    sampler: str,
    temperature: float,
    y_field: str,
    out_path: str,
) -> None:
    """One curve per trace label; x is the sampler parameter value."""
    if y_field not in _Y_LABEL:
        raise ValueError(f"y_field must be one of {sorted(_Y_LABEL)}")
    plt.rcParams["svg.hashsalt"] = "wcs-audit"
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    try:
        for label in sorted(series):
            points = series[label]
            xs = [_param_value(pt) for pt in points]
            ys = [getattr(pt, y_field) for pt in points]
            ax.plot(xs, ys, marker="o", markersize=3, linewidth=1.2, label=label)
        ax.set_xlabel(_X_LABEL.get(sampler, sampler))
        ax.set_ylabel(_Y_LABEL[y_field])
        ax.set_title(f"{sampler} at T={temperature:g}")
        ax.set_ylim(-0.02, 1.02)
        ax.grid(True, alpha=0.3)
        if len(series) > 1:
            ax.legend(fontsize=8)
        fig.savefig(out_path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
