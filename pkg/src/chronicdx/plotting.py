"""Static summary charts.  Output is byte-stable for identical inputs."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .explain import ShapleyReport, overall_ranking  # noqa: E402

plt.rcParams["svg.hashsalt"] = "chronicdx"
plt.rcParams["svg.fonttype"] = "none"

_SAVE_METADATA = {
    ".svg": {"Date": None},
    ".png": {"Software": None},
    ".pdf": {"CreationDate": None, "ModDate": None},
}


def save_figure(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.savefig(path, metadata=_SAVE_METADATA.get(path.suffix.lower(), {}))
    plt.close(fig)
    return path


def shapley_bar_chart(report: ShapleyReport, path: str | Path, title: str = "", top: int = 10) -> Path:
    """Horizontal bars of mean |attribution| for the top features, one stacked segment per class."""
    order = overall_ranking(report)[:top]
    rows = [report.features.index(f) for f in order]
    fig, ax = plt.subplots(figsize=(7.0, 0.45 * len(rows) + 1.6))
    y = np.arange(len(rows))[::-1]
    left = np.zeros(len(rows))
    colors = plt.get_cmap("tab10")
    for c_idx, cls in enumerate(report.classes):
        width = report.mean_abs[rows, c_idx]
        ax.barh(y, width, left=left, color=colors(c_idx % 10), label=str(cls))
        left += width
    ax.set_yticks(y)
    ax.set_yticklabels(order)
    ax.set_xlabel("mean |Shapley value| (impact on class score)")
    if title:
        ax.set_title(title)
    ax.legend(loc="lower right", frameon=False)
    fig.tight_layout()
    return save_figure(fig, path)


def accuracy_chart(rows: list[tuple[str, str, str, float]], path: str | Path, title: str = "") -> Path:
    """Grouped bars of accuracy per disease; ``rows`` are (disease, model, imputation, accuracy)."""
    diseases = list(dict.fromkeys(r[0] for r in rows))
    variants = list(dict.fromkeys(f"{r[1]} / {r[2]}" for r in rows))
    lookup = {(r[0], f"{r[1]} / {r[2]}"): r[3] for r in rows}
    fig, ax = plt.subplots(figsize=(max(6.0, 0.35 * len(variants) * len(diseases)), 4.2))
    width = 0.8 / max(len(variants), 1)
    x = np.arange(len(diseases))
    colors = plt.get_cmap("tab20")
    for v_idx, name in enumerate(variants):
        heights = [lookup.get((d, name), np.nan) for d in diseases]
        ax.bar(x + (v_idx - (len(variants) - 1) / 2) * width, heights, width, color=colors(v_idx % 20), label=name)
    ax.set_xticks(x)
    ax.set_xticklabels(diseases)
    ax.set_ylim(0, 1)
    ax.set_ylabel("accuracy")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=6, ncol=2, frameon=False, loc="upper left", bbox_to_anchor=(1.0, 1.0))
    fig.tight_layout()
    return save_figure(fig, path)
