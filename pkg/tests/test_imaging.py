import math
import struct
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image as PILImage

from wavecxr import imaging as I
from wavecxr import wavelet as W
from wavecxr.errors import (
    CorruptImageError,
    InvalidParamsError,
    OddDimensionError,
    UnsupportedFormatError,
    ZeroDimensionError,
)


def handmade_png(pixels, bit_depth):
    """Grayscale PNG assembled from raw chunks, without any imaging library."""
    pixels = np.asarray(pixels)
    h, w = pixels.shape
    fmt = ">H" if bit_depth == 16 else ">B"
    raw = b"".join(b"\x00" + b"".join(struct.pack(fmt, int(v)) for v in row) for row in pixels)

    def chunk(tag, body):
        return struct.pack(">I", len(body)) + tag + body + struct.pack(">I", zlib.crc32(tag + body))

    ihdr = struct.pack(">IIBBBBB", w, h, bit_depth, 0, 0, 0, 0)
    return b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", ihdr) + chunk(b"IDAT", zlib.compress(raw)) + chunk(b"IEND", b"")


class TestLoad:
    def test_8bit_endpoints(self, tmp_path):
        p = tmp_path / "a.png"
        p.write_bytes(handmade_png([[0, 255], [255, 0]], 8))
        np.testing.assert_array_equal(I.load_image(p), [[0.0, 1.0], [1.0, 0.0]])

    def test_all_zero(self, tmp_path):
        p = tmp_path / "z.png"
        p.write_bytes(handmade_png(np.zeros((3, 4), int), 8))
        out = I.load_image(p)
        assert out.shape == (3, 4)
        np.testing.assert_array_equal(out, 0.0)

    def test_16bit_midpoint(self, tmp_path):
        p = tmp_path / "m.png"
        p.write_bytes(handmade_png([[32768]], 16))
        value = I.load_image(p)[0, 0]
        assert value == 32768 / 65535
        assert value == pytest.approx(0.50000763, abs=5e-9)

    def test_16bit_written_by_pillow(self, tmp_path):
        arr = np.array([[0, 1000], [40000, 65535]], dtype=np.uint16)
        p = tmp_path / "p16.png"
        PILImage.fromarray(arr).save(p)
        np.testing.assert_allclose(I.load_image(p), arr / 65535.0, rtol=0, atol=1e-15)

    def test_rgb_is_channel_average(self, tmp_path):
        arr = np.zeros((1, 2, 3), dtype=np.uint8)
        arr[0, 0] = (30, 60, 90)
        arr[0, 1] = (255, 255, 0)
        p = tmp_path / "c.png"
        PILImage.fromarray(arr).save(p)
        np.testing.assert_allclose(I.load_image(p), [[60 / 255, 170 / 255]], atol=1e-15)

    def test_pgm_8_and_16_bit(self, tmp_path):
        p8 = tmp_path / "a.pgm"
        p8.write_bytes(b"P5\n# comment\n2 1\n255\n" + bytes([0, 255]))
        np.testing.assert_array_equal(I.load_image(p8), [[0.0, 1.0]])
        p16 = tmp_path / "b.pgm"
        p16.write_bytes(b"P5 1 1 65535\n" + struct.pack(">H", 32768))
        assert I.load_image(p16)[0, 0] == 32768 / 65535

    def test_pgm_round_trip(self, tmp_path):
        x = np.random.default_rng(0).integers(0, 1024, size=(5, 7)) / 1023
        p = tmp_path / "r.pgm"
        I.save_pgm(p, x, maxval=1023)
        np.testing.assert_allclose(I.load_image(p), x, atol=1e-15)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="nope.png"):
            I.load_image(tmp_path / "nope.png")

    def test_unsupported(self, tmp_path):
        p = tmp_path / "x.jpg"
        p.write_bytes(b"\xff\xd8\xff\xe0junk")
        with pytest.raises(UnsupportedFormatError):
            I.load_image(p)

    def test_corrupt_png(self, tmp_path):
        p = tmp_path / "bad.png"
        p.write_bytes(handmade_png([[1, 2]], 8)[:30])
        with pytest.raises(CorruptImageError):
            I.load_image(p)

    def test_truncated_pgm(self, tmp_path):
        p = tmp_path / "t.pgm"
        p.write_bytes(b"P5\n4 4\n255\n" + bytes(3))
        with pytest.raises(CorruptImageError):
            I.load_image(p)

    def test_save_png_round_trip(self, tmp_path):
        x = np.arange(12).reshape(3, 4) / 11
        p = tmp_path / "s.png"
        I.save_png(p, x)
        np.testing.assert_allclose(I.load_image(p), np.round(x * 255) / 255, atol=1e-15)


class TestResize:
    def test_identity_is_bitwise(self):
        x = np.random.default_rng(1).uniform(size=(5, 7))
        out = I.resize_bilinear(x, 7, 5)
        np.testing.assert_array_equal(out, x)
        assert out is not x

    def test_checker_to_single_pixel(self):
        assert I.resize_bilinear(np.array([[0.0, 1.0], [1.0, 0.0]]), 1, 1)[0, 0] == 0.5

    def test_ramp_upsample(self):
        ramp = np.tile(np.linspace(0.0, 1.0, 4), (4, 1))
        out = I.resize_bilinear(ramp, 8, 8)
        assert out.shape == (8, 8)
        assert np.all(np.diff(out, axis=1) >= 0)
        np.testing.assert_allclose(out[:, 0], 0.0, atol=1e-9)
        np.testing.assert_allclose(out[:, -1], 1.0, atol=1e-9)

    def test_matches_pointwise_oracle(self):
        # oracle: evaluate the align-centres bilinear formula pixel by pixel
        x = np.random.default_rng(2).uniform(size=(4, 6))
        out_h, out_w = 7, 3
        h, w = x.shape

        def coord(i, n_in, n_out):
            c = min(max((i + 0.5) * n_in / n_out - 0.5, 0.0), n_in - 1)
            lo = int(math.floor(c))
            return lo, min(lo + 1, n_in - 1), c - lo

        want = np.empty((out_h, out_w))
        for r in range(out_h):
            y0, y1, fy = coord(r, h, out_h)
            for c in range(out_w):
                x0, x1, fx = coord(c, w, out_w)
                top = x[y0, x0] * (1 - fx) + x[y0, x1] * fx
                bot = x[y1, x0] * (1 - fx) + x[y1, x1] * fx
                want[r, c] = top * (1 - fy) + bot * fy
        np.testing.assert_allclose(I.resize_bilinear(x, out_w, out_h), want, atol=1e-14)

    def test_zero_dimension(self):
        with pytest.raises(ZeroDimensionError):
            I.resize_bilinear(np.zeros((4, 4)), 0, 3)

    @settings(max_examples=60, deadline=None)
    @given(
        arrays(np.float64, st.tuples(st.integers(1, 9), st.integers(1, 9)), elements=st.floats(0, 1)),
        st.integers(1, 12),
        st.integers(1, 12),
    )
    def test_stays_in_range(self, x, out_w, out_h):
        out = I.resize_bilinear(x, out_w, out_h)
        assert out.shape == (out_h, out_w)
        assert out.min() >= x.min() and out.max() <= x.max()

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0, 1), st.integers(1, 9), st.integers(1, 9), st.integers(1, 12), st.integers(1, 12))
    def test_constant_preserved(self, c, h, w, out_w, out_h):
        np.testing.assert_array_equal(I.resize_bilinear(np.full((h, w), c), out_w, out_h), c)


class TestAugment:
    def test_zero_ranges_are_identity(self):
        x = np.random.default_rng(3).uniform(size=(9, 11))
        for seed in (0, 1, 2**63):
            out = I.augment(x, I.AugmentParams(0.0, 0.0, 0.0, seed))
            np.testing.assert_allclose(out, x, rtol=0, atol=1e-9)

    def test_deterministic(self):
        x = np.random.default_rng(4).uniform(size=(16, 16))
        p = I.AugmentParams(seed=12345)
        np.testing.assert_array_equal(I.augment(x, p), I.augment(x, p))
        assert not np.array_equal(I.augment(x, p), I.augment(x, I.AugmentParams(seed=12346)))

    def test_quarter_turn_moves_pixel(self):
        x = np.zeros((5, 5))
        x[1, 2] = 1.0
        # pixel centre (col 2, row 1) is one step above the centre (2, 2); a
        # quarter turn counter-clockwise as displayed takes "up" to "left"
        theta = math.pi / 2
        dx, dy = 2 - 2, 1 - 2
        col = 2 + dx * math.cos(theta) + dy * math.sin(theta)
        row = 2 - dx * math.sin(theta) + dy * math.cos(theta)
        target = (round(row), round(col))
        assert target == (2, 1)
        out = I.affine_warp(x, 90.0)
        want = np.zeros((5, 5))
        want[target] = 1.0
        np.testing.assert_allclose(out, want, atol=1e-6)

    def test_translation_and_scale(self):
        x = np.zeros((7, 7))
        x[3, 3] = 1.0
        np.testing.assert_allclose(I.affine_warp(x, shift=(2.0, -1.0))[2, 5], 1.0, atol=1e-12)
        # scaling about the centre keeps the centre pixel fixed
        assert I.affine_warp(x, scale=1.0)[3, 3] == 1.0
        assert I.affine_warp(x, scale=2.0)[3, 3] == 1.0

    def test_out_of_frame_is_zero(self):
        out = I.affine_warp(np.ones((6, 6)), shift=(3.0, 0.0))
        np.testing.assert_array_equal(out[:, :3], 0.0)
        np.testing.assert_array_equal(out[:, 3:], 1.0)

    def test_samples_within_ranges(self):
        for seed in range(50):
            angle, (dx, dy), s = I.AugmentParams(10.0, 0.05, 0.10, seed).sample(40, 20)
            assert -10 <= angle <= 10
            assert abs(dx) <= 0.05 * 20 and abs(dy) <= 0.05 * 40
            assert 0.9 <= s <= 1.1

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(rotation_deg=46.0),
            dict(rotation_deg=-1.0),
            dict(translate_frac=0.3),
            dict(scale=0.26),
            dict(seed=-1),
            dict(seed=2**64),
        ],
    )
    def test_invalid_params(self, kwargs):
        with pytest.raises(InvalidParamsError):
            I.AugmentParams(**kwargs)


def stripes(h, w):
    return np.tile(np.arange(w) % 2, (h, 1)).astype(float)


class TestBuildInput:
    def test_constant_wavelet(self):
        t = I.build_input(np.full((10, 12), 0.3), I.WAVELET, W.HAAR, (8, 6))
        assert t.data.shape == (2, 6, 8) and t.layout == "wavelet"
        np.testing.assert_array_equal(t.data, 0.0)

    def test_raw_same_size(self):
        x = np.random.default_rng(5).uniform(size=(6, 9))
        t = I.build_input(x, I.RAW, W.HAAR, (9, 6))
        assert t.data.shape == (1, 6, 9)
        np.testing.assert_array_equal(t.data[0], x)

    def test_vertical_stripes(self):
        t = I.build_input(stripes(16, 16), I.WAVELET, W.HAAR, (16, 16))
        assert np.sum(t.data[0] ** 2) > 0
        np.testing.assert_array_equal(t.data[1], 0.0)

    def test_channels_resized_detail_images(self):
        x = np.random.default_rng(6).uniform(size=(20, 20))
        v, h = W.detail_images(x, W.DB2)
        t = I.build_input(x, I.WAVELET, W.DB2, (7, 5))
        np.testing.assert_array_equal(t.data[0], I.resize_bilinear(v, 7, 5))
        np.testing.assert_array_equal(t.data[1], I.resize_bilinear(h, 7, 5))

    def test_odd_dimension(self):
        with pytest.raises(OddDimensionError):
            I.build_input(np.zeros((5, 6)), I.WAVELET, W.HAAR, (4, 4))
        assert I.build_input(np.zeros((5, 6)), I.RAW, W.HAAR, (4, 4)).data.shape == (1, 4, 4)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            I.build_input(np.zeros((4, 4)), "fft", W.HAAR, (4, 4))

    @settings(max_examples=30, deadline=None)
    @given(st.sampled_from(I.MODES), st.integers(1, 8), st.integers(1, 8), st.integers(0, 1000))
    def test_channel_count(self, mode, hh, hw, seed):
        x = np.random.default_rng(seed).uniform(size=(2 * hh, 2 * hw))
        t = I.build_input(x, mode, W.HAAR, (5, 4))
        assert t.data.shape == (I.channels_for(mode), 4, 5)


class TestPipelineConfig:
    def test_prepare_without_seed_is_unaugmented(self):
        cfg = I.PipelineConfig(mode=I.WAVELET, target=(8, 8))
        x = np.random.default_rng(7).uniform(size=(16, 16))
        np.testing.assert_array_equal(cfg.prepare(x), I.build_input(x, I.WAVELET, W.HAAR, (8, 8)).data)

    def test_prepare_batch_threads_preserve_order(self):
        imgs = [np.random.default_rng(s).uniform(size=(16, 16)) for s in range(6)]
        seeds = list(range(100, 106))
        serial = I.prepare_batch(I.PipelineConfig(target=(8, 8)), imgs, seeds)
        threaded = I.prepare_batch(I.PipelineConfig(target=(8, 8), workers=3), imgs, seeds)
        np.testing.assert_array_equal(serial, threaded)
        assert serial.shape == (6, 2, 8, 8)

    def test_augment_switch(self):
        x = np.random.default_rng(8).uniform(size=(16, 16))
        off = I.PipelineConfig(mode=I.RAW, target=(16, 16), augment=False)
        np.testing.assert_array_equal(off.prepare(x, aug_seed=3)[0], x)
