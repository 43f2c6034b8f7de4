"""Tests for plotctv: CSV parsing, figure data passthrough, determinism, CLI."""

from __future__ import annotations

import csv
from pathlib import Path

import pytest

from plotctv import (
    fraction_at_threshold,
    plot_cumulative,
    plot_summary,
    read_histogram_csv,
    read_metrics_csv,
)
from plotctv.cli import main as cli_main

DATA = Path(__file__).parent / "data"
SETUPS = ("ct", "ct_all_sdt")


# ---------------------------------------------------------------- io


@pytest.mark.parametrize("setup", SETUPS)
def test_read_histogram_matches_csv_exactly(setup):
    path = DATA / setup / "hist_dice.csv"
    table = read_histogram_csv(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        raw = [(float(t), float(f)) for t, f in reader]
    assert list(table.rows) == raw  # exact float equality, no resampling


def test_read_histogram_bad_header(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("thresh,frac\n0.5,1.0\n")
    with pytest.raises(ValueError, match="header"):
        read_histogram_csv(p)


def test_read_histogram_empty(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("threshold,fraction\n")
    with pytest.raises(ValueError, match="empty"):
        read_histogram_csv(p)


def test_read_histogram_fraction_out_of_range(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("threshold,fraction\n0.5,1.5\n")
    with pytest.raises(ValueError, match="outside"):
        read_histogram_csv(p)


@pytest.mark.parametrize("setup", SETUPS)
def test_read_metrics_summary(setup):
    path = DATA / setup / "metrics.csv"
    summary = read_metrics_csv(path, label=setup)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    mean_row = next(r for r in rows if r["case_id"] == "mean")
    std_row = next(r for r in rows if r["case_id"] == "std")
    for m in ("dice", "hd_mm", "hd95_mm", "asd_mm"):
        assert summary.mean[m] == float(mean_row[m])
        assert summary.std[m] == float(std_row[m])
    assert summary.n_cases == len(rows) - 2
    assert summary.label == setup


def test_read_metrics_missing_columns(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("case_id,dice\nc0,0.5\n")
    with pytest.raises(ValueError, match="missing columns"):
        read_metrics_csv(p)


def test_read_metrics_missing_summary_rows(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("case_id,fold,dice,hd_mm,hd95_mm,asd_mm,status\n"
                 "c0,0,0.5,1,1,1,OK\n")
    with pytest.raises(ValueError, match="mean/std"):
        read_metrics_csv(p)


# ---------------------------------------------------------------- figures


def test_fraction_at_threshold_equals_csv_value():
    path = DATA / "ct" / "hist_dice.csv"
    table = read_histogram_csv(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        want = {float(t): float(f) for t, f in reader}
    assert fraction_at_threshold(table, 0.80) == want[0.80]


def test_fraction_at_missing_threshold():
    table = read_histogram_csv(DATA / "ct" / "hist_dice.csv")
    with pytest.raises(ValueError, match="threshold"):
        fraction_at_threshold(table, 0.815)


def test_plot_cumulative_data_passthrough(tmp_path):
    tables = [read_histogram_csv(DATA / s / "hist_dice.csv", metric=s) for s in SETUPS]
    paths, plotted = plot_cumulative([("dice", tables)], tmp_path / "fig.svg")
    assert [p.suffix for p in paths] == [".svg", ".png"]
    assert all(p.exists() for p in paths)
    # legend order = input order; data drawn = CSV rows, exactly
    assert [label for label, _, _ in plotted["dice"]] == list(SETUPS)
    for table, (_, ts, fs) in zip(tables, plotted["dice"]):
        assert ts == table.thresholds()
        assert fs == table.fractions()


def test_plot_cumulative_two_panels(tmp_path):
    dice = [read_histogram_csv(DATA / "ct" / "hist_dice.csv", metric="ct")]
    asd = [read_histogram_csv(DATA / "ct" / "hist_asd.csv", metric="ct")]
    _, plotted = plot_cumulative([("dice", dice), ("asd", asd)], tmp_path / "fig.svg")
    assert set(plotted) == {"dice", "asd"}


def test_plot_cumulative_monotone_curves(tmp_path):
    # dice cumulative curve is non-increasing; asd curve non-decreasing
    dice = read_histogram_csv(DATA / "ct" / "hist_dice.csv")
    asd = read_histogram_csv(DATA / "ct" / "hist_asd.csv")
    df = dice.fractions()
    af = asd.fractions()
    assert all(a >= b for a, b in zip(df, df[1:]))
    assert all(a <= b for a, b in zip(af, af[1:]))


def test_plot_cumulative_empty_raises(tmp_path):
    with pytest.raises(ValueError):
        plot_cumulative([], tmp_path / "fig.svg")
    with pytest.raises(ValueError):
        plot_cumulative([("dice", [])], tmp_path / "fig.svg")


def test_plot_summary_bar_heights_equal_csv_means(tmp_path):
    summaries = [read_metrics_csv(DATA / s / "metrics.csv", label=s) for s in SETUPS]
    paths, plotted = plot_summary(summaries, tmp_path / "table.svg")
    assert all(p.exists() for p in paths)
    for metric in ("dice", "hd_mm", "asd_mm"):
        for s, (label, mean, std) in zip(summaries, plotted[metric]):
            assert label == s.label
            assert mean == s.mean[metric]
            assert std == s.std[metric]


def test_plot_summary_empty_raises(tmp_path):
    with pytest.raises(ValueError):
        plot_summary([], tmp_path / "t.svg")


def test_figures_deterministic_bytes(tmp_path):
    tables = [read_histogram_csv(DATA / s / "hist_dice.csv", metric=s) for s in SETUPS]
    summaries = [read_metrics_csv(DATA / s / "metrics.csv", label=s) for s in SETUPS]
    pa, _ = plot_cumulative([("dice", tables)], tmp_path / "a.svg")
    pb, _ = plot_cumulative([("dice", tables)], tmp_path / "b.svg")
    for a, b in zip(pa, pb):
        assert a.read_bytes() == b.read_bytes()
    sa, _ = plot_summary(summaries, tmp_path / "sa.svg")
    sb, _ = plot_summary(summaries, tmp_path / "sb.svg")
    for a, b in zip(sa, sb):
        assert a.read_bytes() == b.read_bytes()


# ---------------------------------------------------------------- cli


def test_cli_hist(tmp_path, capsys):
    rc = cli_main(["hist",
                   "--dice", str(DATA / "ct" / "hist_dice.csv"),
                   "--asd", str(DATA / "ct" / "hist_asd.csv"),
                   "--out", str(tmp_path / "fig.svg")])
    assert rc == 0
    out = capsys.readouterr().out
    assert "fraction of cases with Dice >= 0.80" in out
    assert (tmp_path / "fig.svg").exists()
    assert (tmp_path / "fig.png").exists()
    # the readout equals the CSV value
    table = read_histogram_csv(DATA / "ct" / "hist_dice.csv")
    want = fraction_at_threshold(table, 0.80)
    printed = float(out.split("Dice >= 0.80: ")[1].split()[0])
    assert printed == pytest.approx(want, abs=1e-6)


def test_cli_hist_requires_input(tmp_path, capsys):
    rc = cli_main(["hist", "--out", str(tmp_path / "fig.svg")])
    assert rc == 2
    assert capsys.readouterr().err.startswith("error: ")


def test_cli_summary(tmp_path, capsys):
    rc = cli_main(["summary",
                   str(DATA / "ct" / "metrics.csv"),
                   str(DATA / "ct_all_sdt" / "metrics.csv"),
                   "--out", str(tmp_path / "table.svg")])
    assert rc == 0
    assert (tmp_path / "table.svg").exists()
    assert (tmp_path / "table.png").exists()


def test_cli_summary_missing_file(tmp_path, capsys):
    rc = cli_main(["summary", str(tmp_path / "nope.csv"),
                   "--out", str(tmp_path / "t.svg")])
    assert rc == 2
    assert capsys.readouterr().err.startswith("error: ")
