"""Figure rendering for reports: sense bars, merge reduction, rank agreement.

All figures are written straight to files with the Agg backend, so rendering
works headless. Each function returns the path it wrote.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluate import GoldScores
from .explain import TopSensesReport, render_share
from .sensebank import SenseDistribution

__all__ = [
    "sense_comparison_figure",
    "merge_reduction_figure",
    "rank_agreement_figure",
]

_PERIOD_COLORS = ("#4878a8", "#c44e52")


def _short(text: str, width: int = 38) -> str:
    return text if len(text) <= width else text[: width - 3] + "..."


def sense_comparison_figure(report: TopSensesReport, path: str | Path) -> Path:
    """Horizontal bars of the top senses per period, one panel per period."""
    path = Path(path)
    fig, axes = plt.subplots(1, 2, figsize=(11, 3.2), sharex=True)
    panels = (
        (axes[0], report.period1, report.total1, 1),
        (axes[1], report.period2, report.total2, 2),
    )
    for ax, shares, total, period in panels:
        labels = [_short(s.display) for s in shares]
        values = [s.share * 100 for s in shares]
        y = np.arange(len(shares))[::-1]
        ax.barh(y, values, color=_PERIOD_COLORS[period - 1], height=0.6)
        ax.set_yticks(y)
        ax.set_yticklabels(labels, fontsize=8)
        ax.set_xlabel("share of usages (%)")
        ax.set_title(f"period {period} ({total} usages)", fontsize=10)
        for yi, s in zip(y, shares):
            ax.text(s.share * 100 + 0.5, yi, s.share_text, va="center", fontsize=8)
        ax.set_xlim(0, 105)
    suffix = "  [partial]" if report.partial else ""
    fig.suptitle(f"top senses: {report.word}{suffix}", fontsize=12)
    fig.tight_layout(rect=(0, 0, 1, 0.93))
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _senses_per_100(distributions: Sequence[SenseDistribution]) -> float:
    rates = [d.sense_count() / d.total * 100 for d in distributions if d.total > 0]
    return float(np.mean(rates)) if rates else 0.0


def merge_reduction_figure(
    stages: Mapping[str, Sequence[SenseDistribution]],
    path: str | Path,
) -> Path:
    """Average number of senses per 100 usages for each merge stage.

    ``stages`` maps a label (e.g. "unmerged", "minimalist t=50") to the
    distributions produced at that stage, in the order bars should appear.
    """
    path = Path(path)
    labels = list(stages)
    values = [_senses_per_100(stages[label]) for label in labels]
    fig, ax = plt.subplots(figsize=(1.6 + 1.4 * len(labels), 3.4))
    x = np.arange(len(labels))
    ax.bar(x, values, color="#4878a8", width=0.55)
    ax.set_xticks(x)
    ax.set_xticklabels(labels, fontsize=9)
    ax.set_ylabel("senses per 100 usages")
    ax.set_title("sense inventory size by merge stage", fontsize=11)
    for xi, v in zip(x, values):
        ax.text(xi, v, f"{v:.1f}", ha="center", va="bottom", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def rank_agreement_figure(
    predicted: Mapping[str, float],
    gold: GoldScores,
    rho: float,
    path: str | Path,
    label: str = "",
) -> Path:
    """Scatter of gold rank vs predicted rank for the shared words."""
    path = Path(path)
    norm_pred = {w.strip().lower(): v for w, v in predicted.items()}
    norm_gold = {w.strip().lower(): v for w, v in gold.scores.items()}
    shared = sorted(set(norm_pred) & set(norm_gold))

    def ranks(values: list[float]) -> np.ndarray:
        arr = np.asarray(values)
        order = arr.argsort()
        out = np.empty(len(arr))
        out[order] = np.arange(1, len(arr) + 1)
        return out

    rx = ranks([norm_pred[w] for w in shared])
    ry = ranks([norm_gold[w] for w in shared])
    fig, ax = plt.subplots(figsize=(4.6, 4.4))
    ax.scatter(rx, ry, s=18, color="#4878a8", alpha=0.8)
    lim = len(shared) + 1
    ax.plot([0, lim], [0, lim], color="#aaaaaa", linewidth=0.8, linestyle="--")
    ax.set_xlabel("predicted change rank")
    ax.set_ylabel("gold change rank")
    title = f"rank agreement (rho={rho:.3f}, n={len(shared)})"
    if label:
        title = f"{label}: {title}"
    ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
