"""Matplotlib rendering of evaluation reports.

Consumes only the emitted report data (the same distribution block external
tools would read) and writes prediction-distribution bar charts next to the
delimited output.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluate import EvalReport

YES_COLOR = "#2b7bba"
NO_COLOR = "#d1495b"


def render_distribution_figure(report: EvalReport, path: str) -> None:
    """Grouped yes/no prediction counts per suite, one bar pair each."""
    names = sorted(report.suites)
    yes_counts = [report.suites[n].collapse.yes_count for n in names]
    no_counts = [report.suites[n].collapse.no_count for n in names]
    x = np.arange(len(names))
    width = 0.38

    fig, ax = plt.subplots(figsize=(max(4.0, 1.6 * len(names)), 3.4))
    ax.bar(x - width / 2, yes_counts, width, label="Yes", color=YES_COLOR)
    ax.bar(x + width / 2, no_counts, width, label="No", color=NO_COLOR)
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=20, ha="right")
    ax.set_ylabel("predictions")
    ax.set_title("Prediction distribution by suite")
    ax.legend(frameon=False)
    for spine in ("top", "right"):
        ax.spines[spine].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_bias_figure(report: EvalReport, path: str, threshold: float = 0.95) -> None:
    """Dominant-class fraction per suite with the collapse threshold line."""
    names = sorted(report.suites)
    bias = [report.suites[n].collapse.bias_fraction for n in names]
    colors = [
        NO_COLOR if report.suites[n].collapse.collapsed else YES_COLOR for n in names
    ]
    x = np.arange(len(names))

    fig, ax = plt.subplots(figsize=(max(4.0, 1.6 * len(names)), 3.0))
    ax.bar(x, bias, 0.6, color=colors)
    ax.axhline(threshold, color="black", linewidth=1.0, linestyle="--", label="collapse threshold")
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=20, ha="right")
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("dominant-class fraction")
    ax.set_title("Prediction bias by suite")
    ax.legend(frameon=False)
    for spine in ("top", "right"):
        ax.spines[spine].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
