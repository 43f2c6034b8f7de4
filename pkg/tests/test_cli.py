"""End-to-end tests of the ctvforge command line interface.

All invocations go through cli.main(argv) in-process; stdout/stderr are
captured with capsys.  Configs are kept tiny so the train/eval commands
finish in seconds.
"""

from __future__ import annotations

import csv
import hashlib
from pathlib import Path

import pytest

from ctvforge import cli


TINY_CFG = """\
# tiny run configuration for CLI tests
dims = 48, 48, 32
n_cases = 2
epochs = 1
n_pos = 2
n_neg = 1
batch_size = 2
voi_size = 16, 16, 8
rotation_deg = 0
"""


def _write_cfg(tmp_path: Path, extra: str = "", name: str = "run.cfg") -> Path:
    cfg = tmp_path / name
    cfg.write_text(TINY_CFG + extra)
    return cfg


def _tree_digest(root: Path) -> dict[str, str]:
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file():
            out[str(p.relative_to(root))] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


def test_phantom_gen_writes_cases_and_manifest(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, f"cohort_dir = {tmp_path / 'cohort'}\n")
    rc = cli.main(["phantom-gen", "--config", str(cfg)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "wrote 2 cases" in out
    cohort = tmp_path / "cohort"
    assert (cohort / "manifest.csv").exists()
    with open(cohort / "manifest.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    for row in rows:
        case_dir = cohort / row["path"]
        for name in ("ct", "gtv", "lns", "lung", "heart", "spinal_canal", "ctv_truth"):
            assert (case_dir / f"{name}.svox").exists()


def test_phantom_gen_deterministic_bytes(tmp_path):
    cfg_a = _write_cfg(tmp_path, f"cohort_dir = {tmp_path / 'a'}\n", name="a.cfg")
    cfg_b = _write_cfg(tmp_path, f"cohort_dir = {tmp_path / 'b'}\n", name="b.cfg")
    assert cli.main(["phantom-gen", "--config", str(cfg_a)]) == 0
    assert cli.main(["phantom-gen", "--config", str(cfg_b)]) == 0
    da = _tree_digest(tmp_path / "a")
    db = _tree_digest(tmp_path / "b")
    assert da and da == db


def test_phantom_gen_refuses_nonempty_dir(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, f"cohort_dir = {tmp_path / 'cohort'}\n")
    assert cli.main(["phantom-gen", "--config", str(cfg)]) == 0
    capsys.readouterr()
    rc = cli.main(["phantom-gen", "--config", str(cfg)])
    assert rc != 0
    err = capsys.readouterr().err
    assert err.startswith("error: ")
    assert "--force" in err
    # --force overwrites in place
    assert cli.main(["phantom-gen", "--config", str(cfg), "--force"]) == 0


def test_sdt_command_writes_four_volumes(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, f"cohort_dir = {tmp_path / 'cohort'}\n")
    assert cli.main(["phantom-gen", "--config", str(cfg)]) == 0
    case_dir = tmp_path / "cohort" / "case_000"
    assert case_dir.is_dir()
    rc = cli.main(["sdt", "--case-dir", str(case_dir)])
    assert rc == 0
    for name in ("sdt_gtvln", "sdt_lung", "sdt_heart", "sdt_spinal_canal"):
        assert (case_dir / f"{name}.svox").exists()


def test_sdt_command_missing_case(tmp_path, capsys):
    rc = cli.main(["sdt", "--case-dir", str(tmp_path / "nope")])
    assert rc != 0
    assert capsys.readouterr().err.startswith("error: ")


def test_train_then_eval_roundtrip(tmp_path, capsys):
    cohort = tmp_path / "cohort"
    out = tmp_path / "out"
    # low threshold: a 1-epoch model may predict everywhere below 0.5,
    # and an all-empty cohort has nothing to histogram
    extra = (f"cohort_dir = {cohort}\noutput_dir = {out}\nn_cases = 3\n"
             "threshold = 0.05\n")
    cfg = _write_cfg(tmp_path, extra)
    assert cli.main(["phantom-gen", "--config", str(cfg)]) == 0
    assert cli.main(["train", "--config", str(cfg)]) == 0
    assert (out / "model.ckpt").exists()
    with open(out / "train_log.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["epoch", "mean_loss", "lr"]
    assert len(rows) == 2  # header + 1 epoch
    float(rows[1][1])  # loss parses

    capsys.readouterr()
    assert cli.main(["eval", "--config", str(cfg)]) == 0
    assert "mean dice" in capsys.readouterr().out
    assert (out / "metrics.csv").exists()
    assert (out / "hist_dice.csv").exists()
    assert (out / "hist_asd.csv").exists()
    with open(out / "metrics.csv", newline="") as fh:
        mrows = list(csv.DictReader(fh))
    # 3 cases + mean + std rows
    assert len(mrows) == 5
    assert {r["case_id"] for r in mrows[:3]} == {"case_000", "case_001", "case_002"}


def test_train_lr_column_reflects_decay(tmp_path):
    cohort = tmp_path / "cohort"
    out = tmp_path / "out"
    extra = (f"cohort_dir = {cohort}\noutput_dir = {out}\n"
             "epochs = 3\nlr_decay_epoch = 3\nlr = 0.001\n")
    cfg = _write_cfg(tmp_path, extra)
    assert cli.main(["phantom-gen", "--config", str(cfg)]) == 0
    assert cli.main(["train", "--config", str(cfg)]) == 0
    with open(out / "train_log.csv", newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    lrs = [float(r[2]) for r in rows]
    assert lrs == pytest.approx([1e-3, 1e-3, 1e-4])


def test_seed_flag_changes_cohort(tmp_path):
    cfg_a = _write_cfg(tmp_path, f"cohort_dir = {tmp_path / 'a'}\n", name="a.cfg")
    cfg_b = _write_cfg(tmp_path, f"cohort_dir = {tmp_path / 'b'}\n", name="b.cfg")
    assert cli.main(["phantom-gen", "--config", str(cfg_a)]) == 0
    assert cli.main(["phantom-gen", "--config", str(cfg_b), "--seed", "7"]) == 0
    assert _tree_digest(tmp_path / "a") != _tree_digest(tmp_path / "b")


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("volumetric_flux = 3\n")
    rc = cli.main(["phantom-gen", "--config", str(cfg)])
    assert rc == 1
    err = capsys.readouterr().err
    assert err.startswith("error: ")
    assert "volumetric_flux" in err


def test_config_bad_value(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("epochs = many\n")
    assert cli.main(["phantom-gen", "--config", str(cfg)]) == 1
    assert "epochs" in capsys.readouterr().err


def test_config_missing_equals(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("just a line\n")
    assert cli.main(["phantom-gen", "--config", str(cfg)]) == 1
    assert "key = value" in capsys.readouterr().err


def test_config_bad_layout(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("channel_layout = ct_everything\n")
    assert cli.main(["phantom-gen", "--config", str(cfg)]) == 1
    assert "channel_layout" in capsys.readouterr().err


def test_unknown_command(capsys):
    rc = cli.main(["frobnicate"])
    assert rc == 2
    assert capsys.readouterr().err.startswith("error: ")


def test_setup_flag_restricts_choices(capsys):
    rc = cli.main(["train", "--setup", "ct_nothing"])
    assert rc == 2
    assert capsys.readouterr().err.startswith("error: ")
