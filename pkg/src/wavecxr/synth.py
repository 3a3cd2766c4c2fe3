"""Synthetic 14-class corpus used when the real scans are unavailable.

Every image is unit-variance Gaussian noise plus the signal of each of its
labels. Two classes carry orientation signal, a sinusoidal grating of
amplitude 0.3: Infiltration has vertical stripes (variation across columns)
and Effusion horizontal stripes (variation across rows). Every other class
shifts the image mean by a fixed per-class offset. Noise-unit values are
stored as ``0.5 + 0.125 * value`` in 8-bit PNGs.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .dataset import CLASS_NAMES, PATH_COLUMN, PATIENT_COLUMN, IMAGE_COLUMN, LABEL_COLUMN, PUBLISHED_COUNTS, decode_labels
from .imaging import save_png

SIZE = 64
GRATING_AMPLITUDE = 0.3
GRATING_PERIOD = 3.0
CO_OCCURRENCE = 0.10
DISPLAY_OFFSET, DISPLAY_SCALE = 0.5, 0.125

VERTICAL_CLASS = "Infiltration"
HORIZONTAL_CLASS = "Effusion"
ORIENTATION_CLASSES = (VERTICAL_CLASS, HORIZONTAL_CLASS)

_OTHER = [c for c in CLASS_NAMES if c not in ORIENTATION_CLASSES]
MEAN_OFFSETS = dict(zip(_OTHER, np.linspace(-0.6, 0.6, len(_OTHER))))
CLASS_PRIOR = np.array([PUBLISHED_COUNTS[c] for c in CLASS_NAMES], dtype=np.float64)
CLASS_PRIOR /= CLASS_PRIOR.sum()


def grating(size, orientation, rng, amplitude=GRATING_AMPLITUDE, period=GRATING_PERIOD):
    phase = rng.uniform(0.0, 2 * np.pi)
    wave = amplitude * np.sin(2 * np.pi * np.arange(size) / period + phase)
    if orientation == "vertical":
        return np.broadcast_to(wave[None, :], (size, size))
    return np.broadcast_to(wave[:, None], (size, size))


def sample_labels(rng) -> np.ndarray:
    bits = np.zeros(len(CLASS_NAMES), dtype=np.uint8)
    first = rng.choice(len(CLASS_NAMES), p=CLASS_PRIOR)
    bits[first] = 1
    if rng.random() < CO_OCCURRENCE:
        prior = CLASS_PRIOR.copy()
        prior[first] = 0.0
        bits[rng.choice(len(CLASS_NAMES), p=prior / prior.sum())] = 1
    return bits


def render(bits, rng, size=SIZE, period=GRATING_PERIOD) -> np.ndarray:
    """Noise-unit image for a label vector (before display scaling)."""
    img = rng.standard_normal((size, size))
    for k in np.flatnonzero(bits):
        name = CLASS_NAMES[k]
        if name == VERTICAL_CLASS:
            img = img + grating(size, "vertical", rng, period=period)
        elif name == HORIZONTAL_CLASS:
            img = img + grating(size, "horizontal", rng, period=period)
        else:
            img = img + MEAN_OFFSETS[name]
    return img


def generate(out_dir, n: int = 2000, seed: int = 0, size: int = SIZE, period: float = GRATING_PERIOD) -> Path:
    """Write ``n`` PNGs under ``out_dir/images`` and ``out_dir/manifest.csv``."""
    if n < 30:
        raise ValueError("the synthetic corpus needs at least 30 images")
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    manifest = out_dir / "manifest.csv"
    with open(manifest, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([IMAGE_COLUMN, LABEL_COLUMN, PATIENT_COLUMN, PATH_COLUMN])
        for i in range(n):
            bits = sample_labels(rng)
            img = DISPLAY_OFFSET + DISPLAY_SCALE * render(bits, rng, size, period)
            name = f"synth_{i:05d}.png"
            save_png(out_dir / "images" / name, img)
            w.writerow([name, decode_labels(bits), f"{i:05d}", f"images/{name}"])
    return manifest
