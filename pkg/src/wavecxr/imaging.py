"""Image I/O, bilinear resampling, seeded affine augmentation and input assembly.

Images are plain 2D ``float64`` arrays indexed ``[row, col]`` with intensities
in [0, 1] after loading.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from . import wavelet
from .errors import (
    CorruptImageError,
    InvalidParamsError,
    OddDimensionError,
    UnsupportedFormatError,
    ZeroDimensionError,
)

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"

RAW = "raw"
WAVELET = "wavelet"
MODES = (RAW, WAVELET)


# ---------------------------------------------------------------------------
# I/O


def load_image(path) -> np.ndarray:
    """Load an 8/16-bit grayscale PNG or binary PGM (P5) as floats in [0, 1].

    Multi-channel PNGs are reduced with an equal-weight average of the colour
    channels (alpha is dropped).
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"image not found: {path}")
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head.startswith(PNG_MAGIC):
        return _load_png(path)
    if head[:2] == b"P5":
        return _load_pgm(path)
    raise UnsupportedFormatError(f"{path}: only PNG and binary PGM (P5) are supported")


def _load_png(path: Path) -> np.ndarray:
    try:
        with PILImage.open(path) as im:
            im.load()
            mode = im.mode
            if mode == "P":
                im = im.convert("RGBA" if "transparency" in im.info else "RGB")
                mode = im.mode
            arr = np.asarray(im)
    except (OSError, SyntaxError, ValueError) as exc:
        raise CorruptImageError(f"{path}: {exc}") from exc

    if mode == "1":
        return arr.astype(np.float64)
    if mode == "L":
        return arr.astype(np.float64) / 255.0
    if mode in ("I;16", "I;16B", "I;16L", "I"):
        return arr.astype(np.float64) / 65535.0
    if mode == "LA":
        return arr[..., 0].astype(np.float64) / 255.0
    if mode in ("RGB", "RGBA"):
        return arr[..., :3].astype(np.float64).mean(axis=2) / 255.0
    raise UnsupportedFormatError(f"{path}: unsupported PNG mode {mode}")


def _pgm_tokens(data: bytes, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise CorruptImageError("truncated PGM header")
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def _load_pgm(path: Path) -> np.ndarray:
    data = path.read_bytes()
    try:
        tokens, offset = _pgm_tokens(data, 4)
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise CorruptImageError(f"{path}: bad PGM header") from exc
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise CorruptImageError(f"{path}: bad PGM header")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = width * height * dtype.itemsize
    raster = data[offset : offset + need]
    if len(raster) < need:
        raise CorruptImageError(f"{path}: truncated PGM raster")
    arr = np.frombuffer(raster, dtype=dtype).reshape(height, width)
    return arr.astype(np.float64) / maxval


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_png(path, image: np.ndarray) -> None:
    """Write an image with intensities in [0, 1] as an 8-bit grayscale PNG."""
    PILImage.fromarray(to_uint8(image)).save(path, format="PNG")


def save_pgm(path, image: np.ndarray, maxval: int = 255) -> None:
    arr = np.round(np.clip(image, 0.0, 1.0) * maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        fh.write(arr.astype(dtype).tobytes())


# ---------------------------------------------------------------------------
# resampling


def _interp_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Row-stochastic linear-interpolation matrix with pixel centres aligned."""
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(int)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    m = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    np.add.at(m, (rows, lo), 1.0 - frac)
    np.add.at(m, (rows, hi), frac)
    return m


def resize_bilinear(image: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resize with the align-centres convention; edges clamp."""
    if out_w < 1 or out_h < 1:
        raise ZeroDimensionError(f"target size {out_w}x{out_h} must be at least 1x1")
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape
    if (h, w) == (out_h, out_w):
        return img.copy()
    out = _interp_matrix(h, out_h) @ img @ _interp_matrix(w, out_w).T
    # guard against rounding just outside the source range
    return np.clip(out, img.min(), img.max())


def _sample_bilinear_zero(img: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample at fractional (x, y) pixel-centre coordinates; outside pixels read as 0."""
    h, w = img.shape
    x0 = np.floor(xs).astype(int)
    y0 = np.floor(ys).astype(int)
    fx = xs - x0
    fy = ys - y0
    padded = np.zeros((h + 2, w + 2))
    padded[1:-1, 1:-1] = img

    def tap(yy, xx):
        inside = (yy >= -1) & (yy <= h) & (xx >= -1) & (xx <= w)
        vals = padded[np.clip(yy + 1, 0, h + 1), np.clip(xx + 1, 0, w + 1)]
        return np.where(inside, vals, 0.0)

    return (
        tap(y0, x0) * (1 - fx) * (1 - fy)
        + tap(y0, x0 + 1) * fx * (1 - fy)
        + tap(y0 + 1, x0) * (1 - fx) * fy
        + tap(y0 + 1, x0 + 1) * fx * fy
    )


def affine_warp(image: np.ndarray, angle_deg: float = 0.0, shift=(0.0, 0.0), scale: float = 1.0) -> np.ndarray:
    """Rotate about the centre, translate, then scale about the centre.

    ``angle_deg`` is counter-clockwise as displayed (row 0 at the top);
    ``shift`` is ``(dx, dy)`` in pixels. The output keeps the input size and
    pixels mapped from outside the frame read as 0.
    """
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    theta = math.radians(angle_deg)
    c, s = math.cos(theta), math.sin(theta)
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    # inverse map: undo scale, undo shift, undo rotation
    u = (xs - cx) / scale - shift[0]
    v = (ys - cy) / scale - shift[1]
    src_x = c * u - s * v + cx
    src_y = s * u + c * v + cy
    return _sample_bilinear_zero(img, src_x, src_y)


@dataclass(frozen=True)
class AugmentParams:
    """Ranges for one random affine draw, fully determined by ``seed``."""

    rotation_deg: float = 10.0
    translate_frac: float = 0.05
    scale: float = 0.10
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rotation_deg <= 45.0:
            raise InvalidParamsError("rotation range must lie in [0, 45] degrees")
        if not 0.0 <= self.translate_frac <= 0.25:
            raise InvalidParamsError("translation range must lie in [0, 0.25]")
        if not 0.0 <= self.scale <= 0.25:
            raise InvalidParamsError("scale range must lie in [0, 0.25]")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidParamsError("seed must be a 64-bit unsigned integer")

    def sample(self, height: int, width: int):
        """Return ``(angle_deg, (dx, dy), scale)`` drawn uniformly from the ranges."""
        rng = np.random.default_rng(int(self.seed))
        angle, tx, ty, sc = rng.uniform(-1.0, 1.0, size=4)
        return (
            float(angle * self.rotation_deg),
            (float(tx * self.translate_frac * width), float(ty * self.translate_frac * height)),
            float(1.0 + sc * self.scale),
        )


def augment(image: np.ndarray, params: AugmentParams) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    angle, shift, scale = params.sample(*img.shape)
    return affine_warp(img, angle, shift, scale)


# ---------------------------------------------------------------------------
# model input


@dataclass(frozen=True)
class InputTensor:
    """Equal-sized channels stacked as ``(C, H, W)``."""

    data: np.ndarray
    layout: str

    @property
    def channels(self):
        return list(self.data)


def channels_for(mode: str) -> int:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    return 1 if mode == RAW else 2


def build_input(image: np.ndarray, mode: str = WAVELET, filt=wavelet.HAAR, target=(64, 64), level: int = 1) -> InputTensor:
    """Preprocess one image into model channels.

    ``target`` is ``(width, height)``. Wavelet mode transforms first and then
    resizes each detail image; channel order is (vertical, horizontal).
    """
    channels_for(mode)
    out_w, out_h = target
    img = np.asarray(image, dtype=np.float64)
    if mode == RAW:
        chans = [resize_bilinear(img, out_w, out_h)]
    else:
        h, w = img.shape
        if h % 2 or w % 2:
            raise OddDimensionError(h, w)
        vertical, horizontal = wavelet.detail_images(img, filt, level)
        chans = [resize_bilinear(vertical, out_w, out_h), resize_bilinear(horizontal, out_w, out_h)]
    return InputTensor(data=np.stack(chans), layout=mode)


@dataclass(frozen=True)
class PipelineConfig:
    mode: str = WAVELET
    wavelet: str = "haar"
    level: int = 1
    target: tuple = (64, 64)
    augment: bool = True
    rotation_deg: float = 10.0
    translate_frac: float = 0.05
    scale: float = 0.10
    workers: int = 1

    @property
    def in_channels(self) -> int:
        return channels_for(self.mode)

    def augment_params(self, seed: int) -> AugmentParams:
        return AugmentParams(self.rotation_deg, self.translate_frac, self.scale, seed)

    def prepare(self, image: np.ndarray, aug_seed: int | None = None) -> np.ndarray:
        """Augment (when a seed is given and augmentation is on), then build the input."""
        if aug_seed is not None and self.augment:
            image = augment(image, self.augment_params(aug_seed))
        tensor = build_input(image, self.mode, wavelet.get_filter(self.wavelet), self.target, self.level)
        return tensor.data


def prepare_batch(config: PipelineConfig, images, aug_seeds=None) -> np.ndarray:
    """Stack prepared inputs as ``(B, C, H, W)``; order is preserved under threading."""
    if aug_seeds is None:
        aug_seeds = [None] * len(images)
    if config.workers > 1 and len(images) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            out = list(pool.map(config.prepare, images, aug_seeds))
    else:
        out = [config.prepare(img, s) for img, s in zip(images, aug_seeds)]
    return np.stack(out)


def load_images(paths, workers: int = 1):
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(load_image, paths))
    return [load_image(p) for p in paths]
