"""Figure rendering for the report commands (headless, file output only)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

COLORS = ["#1b6ca8", "#d1495b", "#edae49", "#66a182", "#8d6a9f", "#2e4057"]


def _figure(width=5.0, height=3.4):
    fig, ax = plt.subplots(figsize=(width, height))
    ax.grid(True, alpha=0.3, linewidth=0.6)
    for side in ("top", "right"):
        ax.spines[side].set_visible(False)
    return fig, ax


def _save(fig, path: str | Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata={"Software": None})
    plt.close(fig)
    return Path(path)


def dissemination_bars(rows: list[dict], path) -> Path:
    """Grouped bars of mean T90 / T100 per topology."""
    fig, ax = _figure()
    names = [r["topology"] for r in rows]
    x = range(len(rows))
    w = 0.38
    ax.bar([i - w / 2 for i in x], [r["t90"] for r in rows], w, label="T90", color=COLORS[0])
    ax.bar([i + w / 2 for i in x], [r["t100"] for r in rows], w, label="T100", color=COLORS[1])
    ax.set_xticks(list(x))
    ax.set_xticklabels(names, rotation=20)
    ax.set_ylabel("rounds")
    ax.legend(frameon=False)
    return _save(fig, path)


def t90_vs_failure(series: dict[str, list[tuple[float, float]]], path) -> Path:
    fig, ax = _figure()
    for i, (name, pts) in enumerate(series.items()):
        xs, ys = zip(*pts)
        ax.plot([100 * x for x in xs], ys, marker="o", color=COLORS[i % len(COLORS)], label=name)
    ax.set_xlabel("link failure rate (%)")
    ax.set_ylabel("mean T90 (rounds)")
    ax.legend(frameon=False)
    return _save(fig, path)


def cumulative_load(series: dict[str, list[int]], path) -> Path:
    fig, ax = _figure()
    for i, (name, cum) in enumerate(series.items()):
        ax.plot(range(1, len(cum) + 1), cum, color=COLORS[i % len(COLORS)], label=name)
    ax.set_xlabel("time step")
    ax.set_ylabel("cumulative transmissions")
    ax.legend(frameon=False)
    return _save(fig, path)


def diameter_vs_moore(rows: list[dict], path) -> Path:
    fig, ax = _figure()
    names = [r["topology"] for r in rows]
    x = list(range(len(rows)))
    ax.bar(x, [r["diameter"] for r in rows], 0.6, color=COLORS[0], label="diameter")
    ax.scatter(x, [r["moore_bound"] for r in rows], color=COLORS[1], zorder=3, label="Moore bound")
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=20)
    ax.set_ylabel("hops")
    ax.legend(frameon=False)
    return _save(fig, path)


def training_history(history: list[dict], path) -> Path:
    fig, ax = _figure()
    b = [h["batch"] for h in history]
    ax.plot(b, [h["mean_return"] for h in history], color=COLORS[0], label="mean return")
    ax.plot(b, [-h["best_diameter"] for h in history], color=COLORS[1], label="-best diameter")
    ax.set_xlabel("batch")
    ax.legend(frameon=False)
    return _save(fig, path)
