"""Color conversion, resize, image I/O, and 7-channel stack tests."""

import colorsys
import struct

import numpy as np
import pytest
from PIL import Image as PILImage

from dermaprep import imaging


# ---------------------------------------------------------------------------
# color conversion


def test_hsv_known_value():
    px = np.array([[[0.2, 0.4, 0.6]]])
    h, s, v = imaging.rgb_to_hsv(px)[0, 0]
    assert h == pytest.approx(0.58333333, abs=1e-7)
    assert s == pytest.approx(0.66666667, abs=1e-7)
    assert v == pytest.approx(0.6, abs=1e-7)


def test_hsv_matches_colorsys_on_random_pixels():
    rng = np.random.default_rng(21)
    pix = rng.random((40, 3))
    got = imaging.rgb_to_hsv(pix.reshape(1, 40, 3))[0]
    for k in range(40):
        h, s, v = colorsys.rgb_to_hsv(*pix[k])
        assert got[k, 0] == pytest.approx(h, abs=1e-6)
        assert got[k, 1] == pytest.approx(s, abs=1e-6)
        assert got[k, 2] == pytest.approx(v, abs=1e-6)


def test_hsv_round_trip():
    rng = np.random.default_rng(22)
    img = rng.random((16, 16, 3))
    back = imaging.hsv_to_rgb(imaging.rgb_to_hsv(img))
    assert np.allclose(back, img, atol=1e-6)


def test_gray_pixels_have_zero_saturation_and_hue():
    grays = np.linspace(0, 1, 11).reshape(1, 11, 1).repeat(3, axis=2)
    hsv = imaging.rgb_to_hsv(grays)
    assert np.all(hsv[..., 0] == 0)
    assert np.all(hsv[..., 1] == 0)
    assert np.allclose(hsv[..., 2], grays[..., 0], atol=1e-7)


def test_luminance_known_values():
    # mid-gray 0.5 and the pure-white / pure-black anchors
    gray = np.full((1, 1, 3), 0.5)
    assert imaging.luv_luminance(gray)[0, 0] == pytest.approx(0.53388965, abs=1e-6)
    white = np.ones((1, 1, 3))
    assert imaging.luv_luminance(white)[0, 0] == pytest.approx(1.0, abs=1e-6)
    black = np.zeros((1, 1, 3))
    assert imaging.luv_luminance(black)[0, 0] == pytest.approx(0.0, abs=1e-9)


def test_luminance_matches_direct_formula():
    rng = np.random.default_rng(23)
    pix = rng.random((25, 3))
    got = imaging.luv_luminance(pix.reshape(1, 25, 3))[0]
    for k in range(25):
        lin = [
            c / 12.92 if c <= 0.04045 else ((c + 0.055) / 1.055) ** 2.4 for c in pix[k]
        ]
        y = 0.2126729 * lin[0] + 0.7151522 * lin[1] + 0.0721750 * lin[2]
        if y > (6 / 29) ** 3:
            lstar = 116.0 * y ** (1 / 3) - 16.0
        else:
            lstar = (29 / 3) ** 3 * y
        assert got[k] == pytest.approx(lstar / 100.0, abs=1e-6)


def test_luminance_is_monotone_in_gray_level():
    grays = np.linspace(0, 1, 64).reshape(1, 64, 1).repeat(3, axis=2)
    lum = imaging.luv_luminance(grays)[0]
    assert np.all(np.diff(lum) > 0)


# ---------------------------------------------------------------------------
# resize


def test_resize_identity_is_exact():
    rng = np.random.default_rng(24)
    img = rng.random((13, 9, 3)).astype(np.float32)
    assert np.array_equal(imaging.resize(img, 9, 13), img)
    gray = rng.random((7, 11)).astype(np.float32)
    assert np.array_equal(imaging.resize(gray, 11, 7), gray)


def test_resize_preserves_constants_exactly():
    img = np.full((5, 8, 3), 0.37, dtype=np.float32)
    out = imaging.resize(img, 21, 13)
    assert out.shape == (13, 21, 3)
    assert np.all(out == np.float32(0.37))


def test_resize_two_to_four_frozen_values():
    row = np.array([[0.0, 1.0]])
    out = imaging.resize(row, 4, 1)
    assert np.allclose(out[0], [0.0, 0.25, 0.75, 1.0], atol=1e-7)


def test_resize_matches_separable_reference():
    rng = np.random.default_rng(25)
    for _ in range(6):
        h_src, w_src = rng.integers(2, 12, size=2)
        h_dst, w_dst = rng.integers(1, 16, size=2)
        img = rng.random((h_src, w_src))
        got = imaging.resize(img, int(w_dst), int(h_dst))
        expected = np.empty((h_dst, w_dst))
        for y in range(h_dst):
            sy = min(max((y + 0.5) * h_src / h_dst - 0.5, 0.0), h_src - 1)
            y0 = int(np.floor(sy))
            y1 = min(y0 + 1, h_src - 1)
            ty = sy - y0
            for x in range(w_dst):
                sx = min(max((x + 0.5) * w_src / w_dst - 0.5, 0.0), w_src - 1)
                x0 = int(np.floor(sx))
                x1 = min(x0 + 1, w_src - 1)
                tx = sx - x0
                top = img[y0, x0] + tx * (img[y0, x1] - img[y0, x0])
                bot = img[y1, x0] + tx * (img[y1, x1] - img[y1, x0])
                expected[y, x] = top + ty * (bot - top)
        assert np.allclose(got, expected, atol=1e-6)


def test_resize_rejects_empty_target():
    with pytest.raises(ValueError):
        imaging.resize(np.zeros((4, 4)), 0, 4)


# ---------------------------------------------------------------------------
# image I/O


def test_png_round_trip(tmp_path):
    rng = np.random.default_rng(26)
    img = rng.random((12, 10, 3)).astype(np.float32)
    p = tmp_path / "a.png"
    imaging.save_image(img, p)
    back = imaging.load_image(p)
    assert back.shape == (12, 10, 3)
    assert np.max(np.abs(back - img)) <= 0.5 / 255 + 1e-7


def test_load_rejects_missing_and_non_image(tmp_path):
    with pytest.raises(imaging.ImageError):
        imaging.load_image(tmp_path / "absent.png")
    junk = tmp_path / "junk.png"
    junk.write_bytes(b"this is not a png")
    with pytest.raises(imaging.ImageError):
        imaging.load_image(junk)


def test_load_rejects_unsupported_depth_and_alpha(tmp_path):
    deep = tmp_path / "deep.png"
    PILImage.fromarray(np.zeros((4, 4), dtype=np.uint16)).save(deep)
    with pytest.raises(imaging.ImageError):
        imaging.load_image(deep)
    rgba = tmp_path / "rgba.png"
    PILImage.fromarray(np.zeros((4, 4, 4), dtype=np.uint8), mode="RGBA").save(rgba)
    with pytest.raises(imaging.ImageError):
        imaging.load_image(rgba)
    bmp = tmp_path / "img.bmp"
    PILImage.fromarray(np.zeros((4, 4, 3), dtype=np.uint8), mode="RGB").save(bmp, format="BMP")
    with pytest.raises(imaging.ImageError):
        imaging.load_image(bmp)


def test_load_promotes_grayscale_and_palette(tmp_path):
    gray = tmp_path / "gray.png"
    PILImage.fromarray(np.arange(16, dtype=np.uint8).reshape(4, 4) * 16, mode="L").save(gray)
    img = imaging.load_image(gray)
    assert img.shape == (4, 4, 3)
    assert np.array_equal(img[..., 0], img[..., 1])


# ---------------------------------------------------------------------------
# 7-channel stack


def test_stack_shape_and_range():
    rng = np.random.default_rng(27)
    for h, w in ((380, 380), (97, 211), (512, 384)):
        img = rng.random((h, w, 3)).astype(np.float32)
        stack = imaging.stack_seven(img)
        assert stack.shape == (7, 380, 380)
        assert stack.dtype == np.float32
        assert float(stack.min()) >= -1.0
        assert float(stack.max()) <= 1.0


def test_stack_constant_half_gray_channels():
    img = np.full((64, 64, 3), 0.5, dtype=np.float32)
    stack = imaging.stack_seven(img)
    # R, G, B, V land exactly on the normalization midpoint
    for ch in (0, 1, 2, 5):
        assert np.all(stack[ch] == 0.0), ch
    # H and S of a gray are zero, mapping to -1 after normalization
    assert np.all(stack[3] == -1.0)
    assert np.all(stack[4] == -1.0)
    # L of mid-gray, pushed through (x - 0.5) / 0.5
    assert np.allclose(stack[6], (0.53388965 - 0.5) / 0.5, atol=1e-5)


def test_stack_converts_before_resizing():
    # half red / half green image: resizing first would blend the colors and
    # change hue; converting first keeps every output hue one of the inputs
    img = np.zeros((4, 8, 3), dtype=np.float32)
    img[:, :4, 0] = 1.0
    img[:, 4:, 1] = 1.0
    stack = imaging.stack_seven(img, size=4)
    hue = (stack[3] + 1.0) / 2.0
    red, green = 0.0, 1.0 / 3.0
    # interior columns are pure red / pure green hue, never a blend artifact
    assert np.allclose(hue[:, 0], red, atol=1e-6)
    assert np.allclose(hue[:, 3], green, atol=1e-6)


def test_stack_file_round_trip(tmp_path):
    rng = np.random.default_rng(28)
    stack = rng.standard_normal((7, 6, 5)).astype(np.float32)
    p = tmp_path / "s.d7st"
    imaging.write_seven_stack(stack, p)
    back = imaging.read_seven_stack(p)
    assert np.array_equal(back, stack)


def test_stack_file_header_layout(tmp_path):
    stack = np.zeros((7, 2, 3), dtype=np.float32)
    p = tmp_path / "s.d7st"
    imaging.write_seven_stack(stack, p)
    raw = p.read_bytes()
    assert raw[:4] == b"D7ST"
    assert struct.unpack("<II", raw[4:12]) == (3, 2)  # width, height
    assert len(raw) == 12 + 7 * 2 * 3 * 4


def test_stack_file_rejects_bad_magic_and_truncation(tmp_path):
    p = tmp_path / "bad.d7st"
    p.write_bytes(b"NOPE" + struct.pack("<II", 2, 2))
    with pytest.raises(imaging.ImageError):
        imaging.read_seven_stack(p)
    q = tmp_path / "short.d7st"
    q.write_bytes(b"D7ST" + struct.pack("<II", 2, 2) + b"\x00" * 8)
    with pytest.raises(imaging.ImageError):
        imaging.read_seven_stack(q)


def test_write_stack_rejects_wrong_channel_count(tmp_path):
    with pytest.raises(ValueError):
        imaging.write_seven_stack(np.zeros((3, 4, 4), dtype=np.float32), tmp_path / "x.d7st")
