"""Cohort persistence: per-case svox directories plus a CSV manifest."""

from __future__ import annotations

import csv
import os
from pathlib import Path

from .phantom import PhantomCase, PhantomConfig, generate_case
from .voxgrid import read_svox, write_svox

CASE_FILES = ("ct", "gtv", "lns", "lung", "heart", "spinal_canal", "ctv_truth")
MANIFEST = "manifest.csv"


def write_case(case_dir: Path, case: PhantomCase) -> None:
    case_dir.mkdir(parents=True, exist_ok=True)
    for name in CASE_FILES:
        write_svox(getattr(case, name), case_dir / f"{name}.svox")


def read_case(case_dir: Path, case_id: str, seed: int) -> PhantomCase:
    vols = {}
    for name in CASE_FILES:
        path = case_dir / f"{name}.svox"
        if not path.exists():
            raise FileNotFoundError(f"missing mask file {path}")
        vols[name] = read_svox(path)
    return PhantomCase(case_id=case_id, seed=seed, **vols)


def generate_cohort(cfg: PhantomConfig, n_cases: int, out_dir: Path,
                    force: bool = False) -> list[PhantomCase]:
    """Write n_cases phantom case dirs and a manifest under out_dir."""
    if n_cases <= 0:
        raise ValueError("empty cohort")
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()) and not force:
        raise FileExistsError(f"output dir {out_dir} not empty (use --force)")
    out_dir.mkdir(parents=True, exist_ok=True)
    cases = []
    rows = []
    for i in range(n_cases):
        case = generate_case(cfg, i)
        write_case(out_dir / case.case_id, case)
        rows.append((case.case_id, case.seed, case.case_id))
        cases.append(case)
    with open(out_dir / MANIFEST, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["case_id", "seed", "path"])
        w.writerows(rows)
    return cases


def load_cohort(cohort_dir: Path) -> list[PhantomCase]:
    cohort_dir = Path(cohort_dir)
    manifest = cohort_dir / MANIFEST
    if not manifest.exists():
        raise FileNotFoundError(f"missing manifest {manifest}")
    cases = []
    with open(manifest, newline="") as fh:
        for row in csv.DictReader(fh):
            cases.append(read_case(cohort_dir / row["path"], row["case_id"], int(row["seed"])))
    return cases
