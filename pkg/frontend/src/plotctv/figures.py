"""Figure rendering: cumulative-histogram panels and a summary bar chart.

Output is deterministic: Agg backend, fixed style, salted SVG ids, and no
date metadata, so identical inputs produce byte-identical SVG and PNG files.
Every plotted array is taken verbatim from the parsed CSV rows.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .io import HistTable, MetricsSummary  # noqa: E402

_STYLE = {
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "svg.hashsalt": "plotctv",
    "font.family": "DejaVu Sans",
    "axes.grid": True,
    "grid.alpha": 0.3,
}

_AXIS_LABELS = {
    "dice": ("Dice score threshold t", "fraction of cases with Dice ≥ t"),
    "asd": ("ASD threshold t (mm)", "fraction of cases with ASD ≤ t"),
}


def fraction_at_threshold(table: HistTable, threshold: float) -> float:
    """The CSV fraction at an exact threshold row (e.g. Dice >= 0.80)."""
    for t, f in table.rows:
        if t == threshold:
            return f
    raise ValueError(f"threshold {threshold} not present in {table.metric} table")


def _save(fig, out_path: Path) -> list[Path]:
    """Write the figure as both SVG and PNG next to each other."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    svg = out_path.with_suffix(".svg")
    png = out_path.with_suffix(".png")
    fig.savefig(svg, format="svg", metadata={"Date": None})
    fig.savefig(png, format="png")
    plt.close(fig)
    return [svg, png]


def plot_cumulative(panels: list[tuple[str, list[HistTable]]], out_path):
    """Render one panel per metric, one curve per table.

    panels: [(metric_name, [HistTable, ...]), ...].  Legend order follows
    input order.  Returns (written paths, plotted data) where plotted data
    is {metric: [(label, thresholds, fractions), ...]} exactly as drawn.
    """
    if not panels or any(not tables for _, tables in panels):
        raise ValueError("no histogram tables to plot")
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(1, len(panels), figsize=(5.0 * len(panels), 4.0))
        if len(panels) == 1:
            axes = [axes]
        plotted: dict[str, list[tuple[str, list[float], list[float]]]] = {}
        for ax, (metric, tables) in zip(axes, panels):
            plotted[metric] = []
            for table in tables:
                ts, fs = table.thresholds(), table.fractions()
                ax.plot(ts, fs, marker="o", markersize=3, label=table.metric)
                plotted[metric].append((table.metric, ts, fs))
            xlabel, ylabel = _AXIS_LABELS.get(metric, (metric, "fraction of cases"))
            ax.set_xlabel(xlabel)
            ax.set_ylabel(ylabel)
            ax.set_ylim(-0.02, 1.02)
            ax.legend(loc="best", fontsize=8)
        fig.suptitle("Cumulative histograms of CTV delineation performance")
        fig.tight_layout()
        paths = _save(fig, out_path)
    return paths, plotted


_BAR_METRICS = ("dice", "hd_mm", "asd_mm")
_BAR_TITLES = {"dice": "Dice score", "hd_mm": "HD (mm)", "asd_mm": "ASD (mm)"}


def plot_summary(summaries: list[MetricsSummary], out_path):
    """Render grouped mean±std bars for dice / HD / ASD, one group per
    metric and one bar per input CSV.  Returns (written paths, plotted data)
    with plotted data {metric: [(label, mean, std), ...]} exactly as drawn.
    """
    if not summaries:
        raise ValueError("no metrics summaries to plot")
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(1, len(_BAR_METRICS), figsize=(10.5, 4.0))
        plotted: dict[str, list[tuple[str, float, float]]] = {}
        xs = range(len(summaries))
        for ax, metric in zip(axes, _BAR_METRICS):
            means = [s.mean[metric] for s in summaries]
            stds = [s.std[metric] for s in summaries]
            ax.bar(list(xs), means, yerr=stds, capsize=4,
                   tick_label=[s.label for s in summaries])
            ax.set_title(_BAR_TITLES[metric])
            ax.tick_params(axis="x", labelrotation=30, labelsize=8)
            plotted[metric] = [(s.label, m, sd)
                               for s, m, sd in zip(summaries, means, stds)]
        fig.suptitle("CTV delineation summary (mean ± std over cases)")
        fig.tight_layout()
        paths = _save(fig, out_path)
    return paths, plotted
