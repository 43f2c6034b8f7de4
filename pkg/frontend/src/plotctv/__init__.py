"""plotctv: batch figure rendering for ctvforge evaluation CSVs."""

from .io import HistTable, MetricsSummary, read_histogram_csv, read_metrics_csv
from .figures import fraction_at_threshold, plot_cumulative, plot_summary

__all__ = [
    "HistTable",
    "MetricsSummary",
    "read_histogram_csv",
    "read_metrics_csv",
    "fraction_at_threshold",
    "plot_cumulative",
    "plot_summary",
]
