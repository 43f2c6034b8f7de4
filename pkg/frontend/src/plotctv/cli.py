"""plotctv command line: `hist` and `summary` figure renderers."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .figures import fraction_at_threshold, plot_cumulative, plot_summary
from .io import read_histogram_csv, read_metrics_csv


@click.group()
def cli():
    """Render figures from ctvforge evaluation CSVs."""


@cli.command("hist")
@click.option("--dice", "dice_csvs", multiple=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Dice cumulative-histogram CSV (repeatable, one curve each).")
@click.option("--asd", "asd_csvs", multiple=True,
              type=click.Path(exists=True, dir_okay=False),
              help="ASD cumulative-histogram CSV (repeatable, one curve each).")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def cmd_hist(dice_csvs, asd_csvs, out_path):
    """Cumulative-histogram figure; writes SVG and PNG."""
    panels = []
    if dice_csvs:
        panels.append(("dice", [read_histogram_csv(p, metric=Path(p).stem)
                                for p in dice_csvs]))
    if asd_csvs:
        panels.append(("asd", [read_histogram_csv(p, metric=Path(p).stem)
                               for p in asd_csvs]))
    if not panels:
        raise click.UsageError("need at least one --dice or --asd CSV")
    paths, _ = plot_cumulative(panels, out_path)
    for metric, tables in panels:
        if metric != "dice":
            continue
        for table in tables:
            f = fraction_at_threshold(table, 0.80)
            click.echo(f"{table.metric}: fraction of cases with Dice >= 0.80: {f:.6f}")
    click.echo("wrote " + " ".join(str(p) for p in paths))


@cli.command("summary")
@click.argument("metrics_csvs", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def cmd_summary(metrics_csvs, out_path):
    """Grouped mean±std bar figure from metrics.csv files; writes SVG and PNG."""
    summaries = [read_metrics_csv(p, label=Path(p).parent.name or Path(p).stem)
                 for p in metrics_csvs]
    paths, _ = plot_summary(summaries, out_path)
    click.echo("wrote " + " ".join(str(p) for p in paths))


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.ClickException as exc:
        print(f"error: {exc.format_message()}", file=sys.stderr)
        return 2
    except click.Abort:
        print("error: aborted", file=sys.stderr)
        return 130
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
