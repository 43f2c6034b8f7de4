"""CSV readers for the two file kinds emitted by `ctvforge eval`.

hist_*.csv:   header `threshold,fraction`, one cumulative-histogram row per
              threshold.
metrics.csv:  header `case_id,fold,dice,hd_mm,hd95_mm,asd_mm,status`,
              one row per case followed by `mean` and `std` summary rows.

Values are kept exactly as parsed — no resampling, smoothing, or rounding.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class HistTable:
    metric: str
    rows: tuple[tuple[float, float], ...]  # (threshold, fraction)

    def thresholds(self) -> list[float]:
        return [t for t, _ in self.rows]

    def fractions(self) -> list[float]:
        return [f for _, f in self.rows]


@dataclass(frozen=True)
class MetricsSummary:
    label: str
    mean: dict[str, float]  # metric -> mean over OK cases
    std: dict[str, float]
    n_cases: int
    n_failed: int


_METRIC_COLS = ("dice", "hd_mm", "hd95_mm", "asd_mm")


def read_histogram_csv(path, metric: str = "") -> HistTable:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["threshold", "fraction"]:
            raise ValueError(f"{path}: expected header threshold,fraction, got {header}")
        rows = []
        for lineno, row in enumerate(reader, 2):
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 columns")
            t, f = float(row[0]), float(row[1])
            if not 0.0 <= f <= 1.0:
                raise ValueError(f"{path}:{lineno}: fraction {f} outside [0, 1]")
            rows.append((t, f))
    if not rows:
        raise ValueError(f"{path}: empty histogram")
    return HistTable(metric=metric or path.stem, rows=tuple(rows))


def read_metrics_csv(path, label: str = "") -> MetricsSummary:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        missing = [c for c in ("case_id", *_METRIC_COLS, "status") if c not in cols]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        stats: dict[str, dict[str, float]] = {}
        n_cases = 0
        n_failed = 0
        for row in reader:
            cid = row["case_id"]
            if cid in ("mean", "std"):
                stats[cid] = {m: float(row[m]) for m in _METRIC_COLS}
                if cid == "mean" and row["status"].startswith("failed="):
                    n_failed = int(row["status"].split("=", 1)[1])
            else:
                n_cases += 1
    if "mean" not in stats or "std" not in stats:
        raise ValueError(f"{path}: missing mean/std summary rows")
    return MetricsSummary(label=label or path.stem, mean=stats["mean"],
                          std=stats["std"], n_cases=n_cases, n_failed=n_failed)
