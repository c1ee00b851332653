"""Figure rendering for run artifacts.

Every plot goes straight to a file; nothing is shown interactively. The
per-run figure mirrors the usual AQM evaluation layout: instantaneous and
averaged queue occupancy over time with the two thresholds ruled across.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .scenario import RunMetrics

QUEUE_COLOR = "#9ecae1"
AVG_COLOR = "#08519c"
THRESHOLD_COLOR = "#d62728"


def _draw_queue_axes(ax, metrics: RunMetrics, min_th: float, max_th: float,
                     q_size: float) -> None:
    ax.plot(metrics.t, metrics.queue, color=QUEUE_COLOR, linewidth=0.5,
            label="instantaneous")
    ax.plot(metrics.t, metrics.avg_queue, color=AVG_COLOR, linewidth=1.2,
            label="averaged")
    ax.axhline(min_th, color=THRESHOLD_COLOR, linewidth=0.8, linestyle="--")
    ax.axhline(max_th, color=THRESHOLD_COLOR, linewidth=0.8, linestyle="--")
    ax.set_xlim(0, metrics.duration)
    ax.set_ylim(0, q_size * 1.05)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("queue (packets)")


def plot_run(metrics: RunMetrics, path, min_th: float = 100.0,
             max_th: float = 150.0, q_size: float = 200.0) -> None:
    """Queue trace for one run: occupancy, moving average, thresholds."""
    fig, ax = plt.subplots(figsize=(8, 3.2))
    _draw_queue_axes(ax, metrics, min_th, max_th, q_size)
    ax.set_title(f"{metrics.aqm}  (mean delay {metrics.mean_delay_ms:.1f} ms, "
                 f"drop rate {100 * metrics.drop_rate:.1f}%)")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_comparison(results: dict[str, RunMetrics], path,
                    min_th: float = 100.0, max_th: float = 150.0,
                    q_size: float = 200.0) -> None:
    """One queue-trace panel per discipline, shared axes."""
    n = len(results)
    cols = 2
    rows = (n + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(10, 2.6 * rows),
                             sharex=True, sharey=True)
    flat = axes.ravel()
    for ax, (name, metrics) in zip(flat, results.items()):
        _draw_queue_axes(ax, metrics, min_th, max_th, q_size)
        ax.set_title(name, fontsize=10)
    for ax in flat[n:]:
        ax.set_axis_off()
    handles, labels = flat[0].get_legend_handles_labels()
    fig.legend(handles, labels, loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
