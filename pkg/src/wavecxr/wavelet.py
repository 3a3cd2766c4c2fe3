"""Dyadic orthonormal filter-bank wavelet transform (1D, separable 2D, pyramids).

Conventions
-----------
* Periodic (circular) boundary extension. Odd lengths are rejected, never padded.
* Analysis: ``approx[k] = sum_n lowpass[n] * x[(2k + n) mod N]`` and likewise
  for ``detail`` with the highpass filter.
* 2D: rows are filtered first (along the width axis), then columns. A subband
  name is ``<row filter><column filter>``, so ``HL`` is highpass along rows and
  lowpass along columns. ``HL`` therefore responds to intensity changes across
  columns, i.e. vertical edges; ``LH`` responds to horizontal edges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DepthTooDeepError,
    DimensionMismatchError,
    InvalidFilterError,
    LengthMismatchError,
    OddDimensionError,
    OddLengthError,
    SignalTooShortError,
)

__all__ = [
    "WaveletFilter",
    "HAAR",
    "DB2",
    "FILTERS",
    "get_filter",
    "SubbandSet",
    "Pyramid",
    "dwt1d",
    "idwt1d",
    "dwt2d",
    "idwt2d",
    "decompose",
    "reconstruct",
    "detail_images",
    "rescale_unit",
]


@dataclass(frozen=True)
class WaveletFilter:
    """Orthonormal analysis filter pair.

    The highpass is always derived from the lowpass through the quadrature
    mirror relation ``highpass[n] = (-1)**n * lowpass[L - 1 - n]``.
    """

    name: str
    lowpass: np.ndarray = field(repr=False)
    highpass: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        lo = np.asarray(self.lowpass, dtype=np.float64)
        if lo.ndim != 1 or lo.size < 2 or lo.size % 2:
            raise InvalidFilterError(f"{self.name}: filter length must be even and >= 2")
        if abs(float(np.sum(lo * lo)) - 1.0) > 1e-12:
            raise InvalidFilterError(f"{self.name}: lowpass is not unit-norm")
        lo.flags.writeable = False
        hi = lo[::-1] * np.where(np.arange(lo.size) % 2 == 0, 1.0, -1.0)
        hi.flags.writeable = False
        object.__setattr__(self, "lowpass", lo)
        object.__setattr__(self, "highpass", hi)

    def __len__(self):
        return self.lowpass.size


def _daubechies4():
    s3 = math.sqrt(3.0)
    return np.array([1 + s3, 3 + s3, 3 - s3, 1 - s3]) / (4 * math.sqrt(2.0))


HAAR = WaveletFilter("haar", np.array([1.0, 1.0]) / math.sqrt(2.0))
DB2 = WaveletFilter("db2", _daubechies4())
FILTERS = {"haar": HAAR, "db2": DB2}


def get_filter(name: str | WaveletFilter) -> WaveletFilter:
    if isinstance(name, WaveletFilter):
        return name
    try:
        return FILTERS[name.lower()]
    except KeyError:
        raise InvalidFilterError(f"unknown wavelet {name!r}; choose from {sorted(FILTERS)}") from None


# ---------------------------------------------------------------------------
# axis-generic analysis / synthesis


def _analysis(x: np.ndarray, filt: WaveletFilter, axis: int):
    x = np.moveaxis(x, axis, -1)
    n = x.shape[-1]
    idx = (2 * np.arange(n // 2)[:, None] + np.arange(len(filt))[None, :]) % n
    taps = x[..., idx]  # (..., n/2, L)
    approx = taps @ filt.lowpass
    detail = taps @ filt.highpass
    return np.moveaxis(approx, -1, axis), np.moveaxis(detail, -1, axis)


def _synthesis(approx: np.ndarray, detail: np.ndarray, filt: WaveletFilter, axis: int):
    a = np.moveaxis(approx, axis, -1)
    d = np.moveaxis(detail, axis, -1)
    half = a.shape[-1]
    n = 2 * half
    out = np.zeros(a.shape[:-1] + (n,), dtype=np.result_type(a, d, np.float64))
    base = 2 * np.arange(half)
    # positions (2k + tap) mod n are distinct over k for a fixed tap
    for tap in range(len(filt)):
        out[..., (base + tap) % n] += filt.lowpass[tap] * a + filt.highpass[tap] * d
    return np.moveaxis(out, -1, axis)


# ---------------------------------------------------------------------------
# 1D


def dwt1d(signal, filt: WaveletFilter = HAAR):
    """Single-level periodic analysis of a 1D signal.

    Returns ``(approx, detail)``, each half the input length.
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("dwt1d expects a 1D signal")
    n = x.size
    if n < 2:
        raise SignalTooShortError(n)
    if n % 2:
        raise OddLengthError(n)
    return _analysis(x, get_filter(filt), axis=0)


def idwt1d(approx, detail, filt: WaveletFilter = HAAR):
    """Inverse of :func:`dwt1d`."""
    a = np.asarray(approx, dtype=np.float64)
    d = np.asarray(detail, dtype=np.float64)
    if a.shape != d.shape or a.ndim != 1:
        raise LengthMismatchError(f"approx length {a.shape} != detail length {d.shape}")
    if a.size < 1:
        raise SignalTooShortError(0)
    return _synthesis(a, d, get_filter(filt), axis=0)


# ---------------------------------------------------------------------------
# 2D


@dataclass(frozen=True)
class SubbandSet:
    """One level of a separable 2D transform; letters are (row filter, column filter)."""

    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray

    def __post_init__(self):
        shapes = {b.shape for b in self.bands()}
        if len(shapes) != 1:
            raise DimensionMismatchError(f"subband shapes differ: {sorted(shapes)}")

    def bands(self):
        return (self.ll, self.lh, self.hl, self.hh)

    @property
    def shape(self):
        return self.ll.shape

    def energy(self) -> float:
        return float(sum(np.sum(b * b) for b in self.bands()))


def _check_even_image(img: np.ndarray):
    if img.ndim != 2:
        raise ValueError("expected a 2D grayscale image")
    h, w = img.shape
    if h < 2 or w < 2 or h % 2 or w % 2:
        raise OddDimensionError(h, w)


def dwt2d(image, filt: WaveletFilter = HAAR) -> SubbandSet:
    """Single-level separable 2D analysis: rows first, then columns."""
    img = np.asarray(image, dtype=np.float64)
    _check_even_image(img)
    filt = get_filter(filt)
    row_lo, row_hi = _analysis(img, filt, axis=1)
    ll, lh = _analysis(row_lo, filt, axis=0)
    hl, hh = _analysis(row_hi, filt, axis=0)
    return SubbandSet(ll=ll, lh=lh, hl=hl, hh=hh)


def idwt2d(subbands: SubbandSet, filt: WaveletFilter = HAAR) -> np.ndarray:
    filt = get_filter(filt)
    shapes = {np.shape(b) for b in subbands.bands()}
    if len(shapes) != 1:
        raise DimensionMismatchError(f"subband shapes differ: {sorted(shapes)}")
    row_lo = _synthesis(subbands.ll, subbands.lh, filt, axis=0)
    row_hi = _synthesis(subbands.hl, subbands.hh, filt, axis=0)
    return _synthesis(row_lo, row_hi, filt, axis=1)


@dataclass(frozen=True)
class Pyramid:
    """Multi-level decomposition; ``levels[0]`` is the finest, ``levels[-1]`` the coarsest."""

    levels: tuple
    final_ll: np.ndarray
    filter: WaveletFilter

    @property
    def depth(self) -> int:
        return len(self.levels)

    def energy(self) -> float:
        """Energy of the coefficients that represent the image (final LL plus all details)."""
        details = sum(float(np.sum(b * b)) for s in self.levels for b in (s.lh, s.hl, s.hh))
        return details + float(np.sum(self.final_ll**2))


def decompose(image, filt: WaveletFilter = HAAR, depth: int = 1) -> Pyramid:
    """Recursive 2D analysis of the LL band, ``depth`` times."""
    img = np.asarray(image, dtype=np.float64)
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if img.ndim != 2:
        raise ValueError("expected a 2D grayscale image")
    h, w = img.shape
    step = 2**depth
    if h < step or w < step or h % step or w % step:
        raise DepthTooDeepError(depth, h, w)
    filt = get_filter(filt)
    levels = []
    current = img
    for _ in range(depth):
        sb = dwt2d(current, filt)
        levels.append(sb)
        current = sb.ll
    return Pyramid(levels=tuple(levels), final_ll=current, filter=filt)


def reconstruct(pyramid: Pyramid) -> np.ndarray:
    current = pyramid.final_ll
    for sb in reversed(pyramid.levels):
        current = idwt2d(SubbandSet(ll=current, lh=sb.lh, hl=sb.hl, hh=sb.hh), pyramid.filter)
    return current


# ---------------------------------------------------------------------------
# directional detail images


def rescale_unit(band: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Min-max rescale to [0, 1].

    A band whose spread is below ``1e-9 * max(1, scale)`` counts as constant:
    it maps to all zeros when its value is also within that tolerance of zero,
    and to all ones otherwise, so a uniform nonzero response stays visible.
    """
    band = np.asarray(band, dtype=np.float64)
    tol = 1e-9 * max(1.0, scale)
    lo, hi = float(band.min()), float(band.max())
    if hi - lo <= tol:
        fill = 0.0 if max(abs(lo), abs(hi)) <= tol else 1.0
        return np.full(band.shape, fill)
    return (band - lo) / (hi - lo)


def detail_images(image, filt: WaveletFilter = HAAR, level: int = 1):
    """Vertical- and horizontal-edge detail images, each rescaled to [0, 1].

    ``vertical`` is the HL band (highpass along rows), ``horizontal`` the LH
    band (highpass along columns), taken from decomposition level ``level``.
    """
    img = np.asarray(image, dtype=np.float64)
    if level == 1:
        sb = dwt2d(img, filt)
    else:
        sb = decompose(img, filt, level).levels[-1]
    scale = float(np.max(np.abs(img))) if img.size else 1.0
    return rescale_unit(sb.hl, scale), rescale_unit(sb.lh, scale)
