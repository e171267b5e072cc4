"""Optional PNG figures for sweep reports (matplotlib, Agg backend)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_sweep(report, path, title: str | None = None, xlabel: str | None = None, series=None) -> None:
    """Accuracy against the sweep condition, one line per gesture.

    ``series`` optionally maps a legend label to another SweepReport drawn
    with dashed lines on the same axes (e.g. with and without normalization).
    """
    fig, ax = plt.subplots(figsize=(6, 4), dpi=100)
    for name, rep, style in [("", report, "-")] + [(k, v, "--") for k, v in (series or {}).items()]:
        gestures = sorted({row[1] for row in rep.rows})
        for g in gestures:
            acc = rep.accuracy(g)
            xs = sorted(acc)
            label = f"{g} {name}".strip()
            ax.plot(xs, [acc[x] for x in xs], style, marker="o", ms=3, label=label)
    ax.set_xlabel(xlabel or report.condition_name)
    ax.set_ylabel("accuracy")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    # fixed metadata keeps the PNG bytes stable across runs
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
