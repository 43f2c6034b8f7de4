"""Command-line entry point: phantom-gen, sdt, train, eval.

Every command is a deterministic function of (config file, flags, seed);
errors print one machine-parsable line to stderr and exit non-zero.
"""

from __future__ import annotations

import csv
import sys
from pathlib import Path

import click

from .config import ConfigError, load_run_config


@click.group()
def cli():
    """Spatial-context encoded CTV delineation toolkit."""


def _load(config, seed, setup, oar_source):
    overrides = {}
    if seed is not None:
        overrides["seed"] = seed
    if setup is not None:
        overrides["channel_layout"] = setup
    if oar_source is not None:
        overrides["oar_source"] = oar_source
    return load_run_config(config, **overrides)


_common = [
    click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None),
    click.option("--seed", type=int, default=None),
    click.option("--setup", type=click.Choice(["ct", "ct_mask", "ct_gtvln_sdt", "ct_all_sdt"]),
                 default=None),
    click.option("--oar-source", type=click.Choice(["manual", "auto"]), default=None),
]


def common_options(fn):
    for opt in reversed(_common):
        fn = opt(fn)
    return fn


@cli.command("phantom-gen")
@common_options
@click.option("--n-cases", type=int, default=None)
@click.option("--force", is_flag=True)
def cmd_phantom_gen(config, seed, setup, oar_source, n_cases, force):
    """Generate a phantom cohort: per-case svox dirs + manifest.csv."""
    from .cohort import generate_cohort

    cfg = _load(config, seed, setup, oar_source)
    n = n_cases if n_cases is not None else cfg.n_cases
    generate_cohort(cfg.phantom_config(), n, Path(cfg.cohort_dir), force=force)
    click.echo(f"wrote {n} cases to {cfg.cohort_dir}")


@cli.command("sdt")
@common_options
@click.option("--case-dir", type=click.Path(file_okay=False), required=True)
def cmd_sdt(config, seed, setup, oar_source, case_dir):
    """Write per-structure SDT svox files for one case directory."""
    from .cohort import read_case
    from .sdt import combined_gtv_ln_sdt, signed_distance
    from .voxgrid import write_svox

    case_dir = Path(case_dir)
    case = read_case(case_dir, case_dir.name, 0)
    write_svox(combined_gtv_ln_sdt(case.gtv, case.lns), case_dir / "sdt_gtvln.svox")
    for organ in ("lung", "heart", "spinal_canal"):
        write_svox(signed_distance(case.oar(organ)), case_dir / f"sdt_{organ}.svox")
    click.echo(f"wrote 4 SDT volumes to {case_dir}")


@cli.command("train")
@common_options
def cmd_train(config, seed, setup, oar_source):
    """Train on the full cohort; write checkpoint + training log CSV."""
    from .cohort import load_cohort
    from .net import save_checkpoint
    from .train import train_model

    cfg = _load(config, seed, setup, oar_source)
    cases = load_cohort(Path(cfg.cohort_dir))
    desc, params, log = train_model(cases, cfg.train_config())
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = Path(cfg.checkpoint) if cfg.checkpoint else out / "model.ckpt"
    save_checkpoint(ckpt, desc, params)
    with open(out / "train_log.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "mean_loss", "lr"])
        for epoch, loss, lr in log:
            w.writerow([epoch, f"{loss:.6f}", f"{lr:.6g}"])
    click.echo(f"checkpoint: {ckpt}")


@cli.command("eval")
@common_options
def cmd_eval(config, seed, setup, oar_source):
    """3-fold cross-validation (fold = case index mod 3): train on two
    folds, evaluate the third; write metrics.csv and histogram CSVs."""
    from .cohort import load_cohort
    from .evalx import cumulative_histogram, write_histogram_csv
    from .train import cross_validate, evaluate_models

    cfg = _load(config, seed, setup, oar_source)
    cases = load_cohort(Path(cfg.cohort_dir))
    tcfg = cfg.train_config()
    models = cross_validate(cases, tcfg)
    report = evaluate_models(models, cases, tcfg, oar_source=cfg.oar_source,
                             threshold=cfg.threshold)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(out / "metrics.csv")
    write_histogram_csv(out / "hist_dice.csv", cumulative_histogram(report.rows, "dice"))
    write_histogram_csv(out / "hist_asd.csv", cumulative_histogram(report.rows, "asd"))
    mean_dice, std_dice = report.mean_std("dice")
    click.echo(f"mean dice {mean_dice:.4f} +/- {std_dice:.4f} ({len(report.rows)} cases)")


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
    except (ConfigError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
