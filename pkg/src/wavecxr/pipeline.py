"""End-to-end commands: transform, split, train, evaluate, compare, synthesize.

Every command writes into a staging directory next to its output directory
and moves the files into place only after all of them were written, so a
failing command leaves no partial outputs behind.
"""
from __future__ import annotations

import contextlib
import os
import shutil
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dataset, metrics, plotting, synth, training, wavelet
from . import model as M
from .config import RunConfig, save_config
from .errors import UnknownLabelError
from .imaging import load_image, load_images, save_png

CHECKPOINT_FILE = "model.ckpt"
HISTORY_FILE = "history.csv"
CONFIG_FILE = "config.txt"
# classes drawn by default in the comparison overlays
OVERLAY_CLASSES = ("Atelectasis", "Effusion", "Infiltration")


@contextlib.contextmanager
def staged(out_dir):
    """Yield a scratch directory whose files move into ``out_dir`` on success."""
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}.staging-", dir=out_dir.parent))
    try:
        yield stage
        out_dir.mkdir(parents=True, exist_ok=True)
        for src in sorted(stage.rglob("*")):
            dst = out_dir / src.relative_to(stage)
            if src.is_dir():
                dst.mkdir(parents=True, exist_ok=True)
            else:
                os.replace(src, dst)
    finally:
        shutil.rmtree(stage, ignore_errors=True)


def _moved(paths, stage, out_dir):
    return [Path(out_dir) / Path(p).relative_to(stage) for p in paths]


# ---------------------------------------------------------------------------
# dwt


def run_dwt(input_path, filter_name="haar", depth=1, out_dir="dwt_out", all_subbands=False) -> list:
    """Write the vertical and horizontal detail images of ``input_path`` as 8-bit PNGs.

    The detail images come from decomposition level ``depth``. With
    ``all_subbands`` every subband of every level is written too, each
    min-max rescaled.
    """
    image = load_image(input_path)
    filt = wavelet.get_filter(filter_name)
    pyramid = wavelet.decompose(image, filt, depth)
    with staged(out_dir) as stage:
        written = []
        vertical, horizontal = wavelet.detail_images(image, filt, depth)
        for name, band in (("vertical", vertical), ("horizontal", horizontal)):
            written.append(stage / f"{name}.png")
            save_png(written[-1], band)
        if all_subbands:
            for i, level in enumerate(pyramid.levels, 1):
                for name, band in zip(("ll", "lh", "hl", "hh"), level.bands()):
                    written.append(stage / f"level{i}_{name}.png")
                    save_png(written[-1], wavelet.rescale_unit(band, float(np.abs(band).max())))
    return _moved(written, stage, out_dir)


# ---------------------------------------------------------------------------
# split


def run_split(manifest_path, ratios=dataset.DEFAULT_RATIOS, seed=0, out_dir="splits",
              group_by_patient=False, image_root=None) -> dict:
    entries = dataset.parse_manifest(manifest_path, image_root or None)
    parts = dataset.split(entries, tuple(ratios), seed, group_by_patient)
    with staged(out_dir) as stage:
        written = dataset.write_split(parts, stage)
    return {k: Path(out_dir) / p.name for k, p in written.items()}


# ---------------------------------------------------------------------------
# train / eval


def build_model(cfg: RunConfig) -> M.Model:
    pipe = cfg.pipeline()
    w, h = pipe.target
    model = M.init_model(M.default_specs(pipe.in_channels, size=(h, w)), cfg.seed, (pipe.in_channels, h, w))
    return M.freeze_first(model, cfg.freeze_k)


def _image_cache(entries, workers=1) -> dict:
    paths = sorted({e.path for e in entries})
    return dict(zip(paths, load_images(paths, workers)))


def run_train(cfg: RunConfig, split_dir=None, out_dir=None, callback=None, images=None):
    """Train from a split directory; writes checkpoint, history and the config used.

    Returns ``(model, history)``.
    """
    split_dir = Path(split_dir or cfg.split_dir)
    out_dir = Path(out_dir or Path(cfg.out_dir) / cfg.mode)
    parts = dataset.read_split(split_dir)
    model = build_model(cfg)
    model, history = training.train(model, parts, cfg.pipeline(), cfg.hyperparams(), images=images, callback=callback)
    with staged(out_dir) as stage:
        M.save_checkpoint(model, stage / CHECKPOINT_FILE)
        training.write_history(history, stage / HISTORY_FILE)
        save_config(cfg, stage / CONFIG_FILE)
    return model, history


def run_eval(cfg: RunConfig, checkpoint, test_csv=None, out_dir=None, images=None) -> metrics.Evaluation:
    """Evaluate a checkpoint on a test split CSV and write ROC/AUC files."""
    checkpoint = Path(checkpoint)
    if not checkpoint.is_file():
        raise FileNotFoundError(f"checkpoint not found: {checkpoint}")
    model = M.load_checkpoint(checkpoint)
    test_csv = Path(test_csv or Path(cfg.split_dir) / "test.csv")
    entries = dataset.parse_manifest(test_csv)
    ev = metrics.evaluate(model, entries, cfg.pipeline(), images)
    with staged(out_dir or checkpoint.parent / "eval") as stage:
        metrics.write_evaluation(ev, stage)
    return ev


def run_compare(raw_dir, wavelet_dir, out_dir="compare", classes=OVERLAY_CLASSES) -> metrics.ComparisonReport:
    report = metrics.compare(metrics.read_evaluation(raw_dir), metrics.read_evaluation(wavelet_dir))
    for name in classes:
        if name not in dataset.CLASS_NAMES:
            raise UnknownLabelError(name)
    with staged(out_dir) as stage:
        metrics.write_report(report, stage / metrics.REPORT_FILE)
        plotting.write_overlays(report, stage, classes)
    return report


def run_synth(out_dir="synth", n=2000, seed=0) -> Path:
    with staged(out_dir) as stage:
        synth.generate(stage, n, seed)
    return Path(out_dir) / "manifest.csv"


# ---------------------------------------------------------------------------
# full raw-vs-wavelet comparison on the synthetic corpus


@dataclass
class DemoResult:
    report: metrics.ComparisonReport
    histories: dict
    seconds: dict
    out_dir: Path


def run_demo(cfg: RunConfig, out_dir, callback=None, log=print) -> DemoResult:
    """Synthesize, split, then train and evaluate both arms with identical seeds.

    The arms differ only in ``mode``. Layout under ``out_dir``: ``synth/``,
    ``splits/``, ``raw/``, ``wavelet/`` (each with ``eval/``) and ``compare/``.
    """
    out_dir = Path(out_dir)
    manifest = run_synth(out_dir / "synth", cfg.synth_n, cfg.synth_seed)
    split_dir = out_dir / "splits"
    run_split(manifest, cfg.split_ratios, cfg.split_seed, split_dir, cfg.group_by_patient)
    parts = dataset.read_split(split_dir)
    images = _image_cache(parts.train + parts.validation + parts.test, cfg.workers)
    histories, seconds = {}, {}
    for mode in ("raw", "wavelet"):
        arm = cfg.replace(mode=mode, split_dir=str(split_dir), out_dir=str(out_dir))
        start = time.perf_counter()
        _, histories[mode] = run_train(arm, split_dir, out_dir / mode, callback=callback, images=images)
        run_eval(arm, out_dir / mode / CHECKPOINT_FILE, split_dir / "test.csv", out_dir / mode / "eval", images)
        seconds[mode] = time.perf_counter() - start
        log(f"{mode}: trained in {seconds[mode]:.1f} s")
    report = run_compare(out_dir / "raw" / "eval", out_dir / "wavelet" / "eval", out_dir / "compare")
    return DemoResult(report, histories, seconds, out_dir)
