"""Line-oriented `key = value` run configuration.

Flags override file values; file values override defaults. Unknown keys
are rejected so typos fail loudly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .phantom import PhantomConfig
from .pipeline import CHANNEL_LAYOUTS
from .train import TrainConfig
from .voxgrid import Spacing


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # paths
    cohort_dir: str = "cohort"
    output_dir: str = "out"
    checkpoint: str = ""
    # phantom
    n_cases: int = 30
    dims: tuple[int, int, int] = (64, 64, 48)
    spacing: tuple[float, float, float] = (1.0, 1.0, 2.5)
    margin_xy: float = 12.0
    margin_z: float = 30.0
    oar_penetration: float = 2.0
    ln_count_min: int = 1
    ln_count_max: int = 3
    noise_sigma: float = 20.0
    # pipeline / training
    channel_layout: str = "ct_all_sdt"
    jitter_halfwidth_mm: float = 2.0
    rotation_deg: float = 10.0
    n_pos: int = 60
    n_neg: int = 20
    voi_size: tuple[int, int, int] = (32, 32, 16)
    sdt_clamp_mm: float = 40.0
    ct_clamp: float = 1000.0
    epochs: int = 30
    lr: float = 1e-3
    beta1: float = 0.99
    beta2: float = 0.999
    weight_decay: float = 0.005
    batch_size: int = 4
    lr_decay_epoch: int = 0
    lr_decay_factor: float = 0.1
    lr_warmup_epochs: int = 0
    threshold: float = 0.5
    oar_source: str = "manual"
    seed: int = 0

    def __post_init__(self):
        if self.channel_layout not in CHANNEL_LAYOUTS:
            raise ConfigError(f"unknown channel_layout {self.channel_layout!r}")
        if self.oar_source not in ("manual", "auto"):
            raise ConfigError(f"oar_source must be manual|auto, got {self.oar_source!r}")

    def phantom_config(self) -> PhantomConfig:
        return PhantomConfig(
            dims=self.dims,
            spacing=Spacing(*self.spacing),
            margin_xy=self.margin_xy,
            margin_z=self.margin_z,
            oar_penetration=self.oar_penetration,
            ln_count_range=(self.ln_count_min, self.ln_count_max),
            noise_sigma=self.noise_sigma,
            seed=self.seed,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            layout=self.channel_layout,
            epochs=self.epochs,
            lr=self.lr,
            beta1=self.beta1,
            beta2=self.beta2,
            weight_decay=self.weight_decay,
            batch_size=self.batch_size,
            n_pos=self.n_pos,
            n_neg=self.n_neg,
            voi_size=self.voi_size,
            jitter_halfwidth_mm=self.jitter_halfwidth_mm,
            rotation_deg=self.rotation_deg,
            ct_clamp=self.ct_clamp,
            sdt_clamp_mm=self.sdt_clamp_mm,
            lr_decay_epoch=self.lr_decay_epoch,
            lr_decay_factor=self.lr_decay_factor,
            lr_warmup_epochs=self.lr_warmup_epochs,
            seed=self.seed,
        )


def _parse_value(name: str, raw: str, target_type):
    raw = raw.strip()
    try:
        if target_type is int:
            return int(raw)
        if target_type is float:
            return float(raw)
        if target_type is str:
            return raw
        # tuple fields: comma-separated
        parts = [p.strip() for p in raw.split(",")]
        if name in ("dims", "voi_size"):
            return tuple(int(p) for p in parts)
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def parse_config_file(path) -> dict:
    """Parse key = value lines; '#' starts a comment."""
    known = {f.name: f.type for f in fields(RunConfig)}
    type_map = {f.name: type(getattr(RunConfig(), f.name)) for f in fields(RunConfig)}
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            key = key.strip()
            if key not in known:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = _parse_value(key, val, type_map[key])
    return out


def load_run_config(path=None, **overrides) -> RunConfig:
    values = parse_config_file(path) if path else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
