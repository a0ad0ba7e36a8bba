"""Summary figure for evaluation reports: one bar panel per metric."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_PANELS = [
    ("lpips", "LPIPS (lower better)"),
    ("incoherence", "Incoherence (lower better)"),
    ("psnr", "PSNR dB (higher better)"),
]


def render_report_figure(report, out_path: str | Path) -> Path:
    """Render per-method mean bars for each metric to a PNG; returns the path."""
    out_path = Path(out_path)
    labels = list(report.means.keys())
    panels = [(key, title) for key, title in _PANELS if _has_values(report, key)]
    if not panels:
        panels = [("psnr", "PSNR dB (higher better)")]
    fig, axes = plt.subplots(1, len(panels), figsize=(4.0 * len(panels), 3.4))
    if len(panels) == 1:
        axes = [axes]
    x = range(len(labels))
    for ax, (key, title) in zip(axes, panels):
        values = [_finite(report.means[label].get(key)) for label in labels]
        ax.bar(x, values, color="#4878a8", width=0.6)
        ax.set_xticks(list(x))
        ax.set_xticklabels(labels, rotation=20, ha="right", fontsize=8)
        ax.set_title(title, fontsize=10)
        ax.grid(axis="y", alpha=0.3)
    fig.suptitle(f"evaluation: {Path(report.dataset).name}", fontsize=11)
    fig.tight_layout(rect=(0, 0, 1, 0.93))
    fig.savefig(out_path, dpi=110)
    plt.close(fig)
    return out_path


def _has_values(report, key: str) -> bool:
    return any(report.means[label].get(key) is not None for label in report.means)


def _finite(value) -> float:
    if value is None:
        return 0.0
    if isinstance(value, float) and math.isinf(value):
        # an infinite mean PSNR (perfect reconstruction) still needs a bar
        return 99.0
    return float(value)
