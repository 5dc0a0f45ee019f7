"""Figure rendering for pipeline reports.

Figures are written next to the delimited outputs of the corresponding
command.  PNG only, fixed size, no timestamps, so reruns stay byte-identical.
"""

from __future__ import annotations

from collections import Counter
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .metrics import NoveltyReport  # noqa: E402
from .scoring import ScoredPattern  # noqa: E402


def _save(fig, path: str | Path) -> None:
    fig.savefig(path, dpi=100, metadata={"Software": "tuplemine"})
    plt.close(fig)


def pattern_plausibility_figure(scored: list[ScoredPattern], path: str | Path) -> None:
    """Horizontal bars of plausibility per selected pattern, grouped by relation."""
    fig, ax = plt.subplots(figsize=(8, max(2.5, 0.4 * len(scored) + 1)))
    labels = [f"{p.relation}: {p.key[:48]}" for p in scored]
    values = [p.plausibility for p in scored]
    pos = range(len(scored))
    ax.barh(list(pos), values, color="steelblue")
    ax.set_yticks(list(pos))
    ax.set_yticklabels(labels, fontsize=7)
    ax.invert_yaxis()
    ax.set_xlabel("plausibility")
    ax.set_title("Selected patterns")
    fig.tight_layout()
    _save(fig, path)


def relation_counts_figure(relation_counts: Counter, path: str | Path) -> None:
    """Candidate tuple counts per relation."""
    relations = sorted(relation_counts)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(relations, [relation_counts[r] for r in relations], color="darkseagreen")
    ax.set_ylabel("candidate tuples")
    ax.set_title("Extracted knowledge per relation")
    ax.tick_params(axis="x", rotation=30)
    fig.tight_layout()
    _save(fig, path)


def score_histogram(scores: list[float], path: str | Path) -> None:
    """Distribution of ranked plausibility scores."""
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.hist(scores, bins=20, range=(0.0, 1.0), color="indianred", edgecolor="black")
    ax.set_xlabel("plausibility score")
    ax.set_ylabel("tuples")
    ax.set_title("Ranked knowledge score distribution")
    fig.tight_layout()
    _save(fig, path)


def novelty_figure(report: NoveltyReport, path: str | Path) -> None:
    """Bar chart of the two novelty rates."""
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.bar(["novel tuples", "novel concepts"], [report.novel_t, report.novel_c],
           color=["steelblue", "darkseagreen"])
    ax.set_ylim(0.0, 1.0)
    ax.set_ylabel("proportion")
    ax.set_title("Novelty vs seed knowledge base")
    for i, v in enumerate([report.novel_t, report.novel_c]):
        ax.text(i, v + 0.02, f"{v:.4f}", ha="center", fontsize=9)
    fig.tight_layout()
    _save(fig, path)
