"""Flat ``key = value`` run configuration with typed defaults.

Lines starting with ``#`` are comments. Tuples are written comma-separated,
booleans as ``true``/``false``, and floats with ``repr`` so a save/load
cycle is lossless.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .dataset import DEFAULT_RATIOS
from .errors import ConfigError
from .imaging import MODES, PipelineConfig
from .model import Hyperparams
from .wavelet import FILTERS


@dataclass(frozen=True)
class RunConfig:
    # preprocessing
    mode: str = "wavelet"
    wavelet: str = "haar"
    depth: int = 1
    target: tuple = (64, 64)  # width, height
    augment: bool = True
    rotation_deg: float = 10.0
    translate_frac: float = 0.05
    scale_frac: float = 0.10
    workers: int = 1
    # data
    manifest: str = ""
    image_dir: str = ""
    split_ratios: tuple = DEFAULT_RATIOS
    split_seed: int = 0
    group_by_patient: bool = False
    synth_n: int = 2000
    synth_seed: int = 0
    # training
    epochs: int = 15
    batch_size: int = 20
    learning_rate: float = 3e-4
    momentum: float = 0.9
    lr_decay_step: int = 0
    lr_decay_gamma: float = 0.1
    freeze_k: int = 0
    seed: int = 0
    # paths
    split_dir: str = "splits"
    out_dir: str = "runs"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.wavelet not in FILTERS:
            raise ConfigError(f"wavelet must be one of {sorted(FILTERS)}, got {self.wavelet!r}")
        if self.depth < 1:
            raise ConfigError("depth must be >= 1")
        if len(self.target) != 2 or min(self.target) < 1:
            raise ConfigError("target must be two positive integers (width, height)")
        if len(self.split_ratios) != 3:
            raise ConfigError("split_ratios needs three values")

    def pipeline(self) -> PipelineConfig:
        return PipelineConfig(
            mode=self.mode,
            wavelet=self.wavelet,
            level=self.depth,
            target=tuple(self.target),
            augment=self.augment,
            rotation_deg=self.rotation_deg,
            translate_frac=self.translate_frac,
            scale=self.scale_frac,
            workers=self.workers,
        )

    def hyperparams(self) -> Hyperparams:
        try:
            return Hyperparams(
                epochs=self.epochs,
                batch_size=self.batch_size,
                learning_rate=self.learning_rate,
                momentum=self.momentum,
                seed=self.seed,
                lr_decay_step=self.lr_decay_step,
                lr_decay_gamma=self.lr_decay_gamma,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


_TUPLE_ITEM = {"target": int, "split_ratios": float}


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    return str(value)


def _convert(name, default, text):
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low not in ("true", "false"):
                raise ValueError(text)
            return low == "true"
        if isinstance(default, tuple):
            item = _TUPLE_ITEM[name]
            return tuple(item(t.strip()) for t in text.split(",") if t.strip())
        return type(default)(text)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {text!r}") from None


def to_text(cfg: RunConfig) -> str:
    return "".join(f"{f.name} = {_format(getattr(cfg, f.name))}\n" for f in fields(cfg))


def from_text(text: str, base: RunConfig | None = None) -> RunConfig:
    base = base or RunConfig()
    defaults = {f.name: getattr(base, f.name) for f in fields(base)}
    values = {}
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value'")
        key, _, value = (p.strip() for p in line.partition("="))
        if key not in defaults:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        values[key] = _convert(key, defaults[key], value)
    return dataclasses.replace(base, **values)


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config not found: {path}")
    return from_text(path.read_text(encoding="utf-8"))


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(to_text(cfg), encoding="utf-8")
