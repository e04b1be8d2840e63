"""Backend-equivalence and reference-loop oracles for the pixel kernels."""

import numpy as np
import pytest

from dermaprep._kernels import numba_impl, numpy_impl

BACKENDS = [numpy_impl, numba_impl]


def _random_footprint(rng, reach=5):
    n = int(rng.integers(1, 24))
    dys = rng.integers(-reach, reach + 1, size=n).astype(np.int64)
    dxs = rng.integers(-reach, reach + 1, size=n).astype(np.int64)
    return dys, dxs


def _dilate_loop(mask, dys, dxs):
    h, w = mask.shape
    out = np.zeros_like(mask)
    for y in range(h):
        for x in range(w):
            for dy, dx in zip(dys, dxs):
                yy, xx = y + dy, x + dx
                if 0 <= yy < h and 0 <= xx < w and mask[yy, xx]:
                    out[y, x] = True
                    break
    return out


def _erode_loop(mask, dys, dxs):
    h, w = mask.shape
    out = np.zeros_like(mask)
    for y in range(h):
        for x in range(w):
            ok = True
            for dy, dx in zip(dys, dxs):
                yy, xx = y + dy, x + dx
                if not (0 <= yy < h and 0 <= xx < w and mask[yy, xx]):
                    ok = False
                    break
            out[y, x] = ok
    return out


def _gray_loop(img, dys, dxs, reducer):
    h, w = img.shape
    out = img.copy()
    for y in range(h):
        for x in range(w):
            vals = [
                img[y + dy, x + dx]
                for dy, dx in zip(dys, dxs)
                if 0 <= y + dy < h and 0 <= x + dx < w
            ]
            if vals:
                out[y, x] = reducer(vals)
    return out


def test_binary_morphology_matches_reference_loop():
    rng = np.random.default_rng(11)
    for impl in BACKENDS:
        for _ in range(12):
            h, w = rng.integers(4, 20, size=2)
            mask = rng.random((h, w)) < rng.uniform(0.05, 0.7)
            dys, dxs = _random_footprint(rng, reach=4)
            assert np.array_equal(impl.binary_dilate(mask, dys, dxs), _dilate_loop(mask, dys, dxs))
            assert np.array_equal(impl.binary_erode(mask, dys, dxs), _erode_loop(mask, dys, dxs))


def test_gray_morphology_matches_reference_loop():
    rng = np.random.default_rng(12)
    for impl in BACKENDS:
        for _ in range(12):
            h, w = rng.integers(4, 20, size=2)
            img = rng.random((h, w)).astype(np.float32)
            dys, dxs = _random_footprint(rng, reach=4)
            assert np.array_equal(impl.gray_dilate(img, dys, dxs), _gray_loop(img, dys, dxs, max))
            assert np.array_equal(impl.gray_erode(img, dys, dxs), _gray_loop(img, dys, dxs, min))


def test_out_of_bounds_taps_leave_pixels_unchanged():
    rng = np.random.default_rng(13)
    img = rng.random((6, 6)).astype(np.float32)
    far = np.array([99], dtype=np.int64)
    for impl in BACKENDS:
        assert np.array_equal(impl.gray_dilate(img, far, far), img)
        assert np.array_equal(impl.gray_erode(img, far, far), img)
        mask = rng.random((6, 6)) < 0.5
        assert not impl.binary_dilate(mask, far, far).any()
        assert not impl.binary_erode(mask, far, far).any()


def test_backends_agree_on_random_inputs():
    rng = np.random.default_rng(14)
    for trial in range(10):
        h, w = rng.integers(8, 48, size=2)
        dtype = np.float32 if trial % 2 else np.float64
        img = rng.random((h, w)).astype(dtype)
        density = 0.03 if trial < 5 else 0.5  # both dilate strategies
        mask = rng.random((h, w)) < density
        dys, dxs = _random_footprint(rng)
        for name in ("binary_dilate", "binary_erode"):
            a = getattr(numpy_impl, name)(mask, dys, dxs)
            b = getattr(numba_impl, name)(mask, dys, dxs)
            assert np.array_equal(a, b), name
        for name in ("gray_dilate", "gray_erode"):
            a = getattr(numpy_impl, name)(img, dys, dxs)
            b = getattr(numba_impl, name)(img, dys, dxs)
            assert a.dtype == b.dtype and np.array_equal(a, b), name
        assert np.array_equal(numpy_impl.fill_holes(mask), numba_impl.fill_holes(mask))
        area = int(rng.integers(1, 12))
        assert np.array_equal(
            numpy_impl.drop_small_components(mask, area),
            numba_impl.drop_small_components(mask, area),
        )


def _flood_components(mask, diag):
    h, w = mask.shape
    seen = np.zeros_like(mask)
    comps = []
    steps = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    if not diag:
        steps = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    for y0 in range(h):
        for x0 in range(w):
            if not mask[y0, x0] or seen[y0, x0]:
                continue
            stack = [(y0, x0)]
            seen[y0, x0] = True
            comp = []
            while stack:
                y, x = stack.pop()
                comp.append((y, x))
                for dy, dx in steps:
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < h and 0 <= xx < w and mask[yy, xx] and not seen[yy, xx]:
                        seen[yy, xx] = True
                        stack.append((yy, xx))
            comps.append(comp)
    return comps


def test_fill_holes_matches_border_flood_oracle():
    rng = np.random.default_rng(15)
    for impl in BACKENDS:
        for _ in range(10):
            h, w = rng.integers(4, 24, size=2)
            mask = rng.random((h, w)) < rng.uniform(0.2, 0.7)
            # oracle: 4-connected background components touching the border stay
            background = ~mask
            expected = mask.copy()
            for comp in _flood_components(background, diag=False):
                on_border = any(
                    y == 0 or y == h - 1 or x == 0 or x == w - 1 for y, x in comp
                )
                if not on_border:
                    for y, x in comp:
                        expected[y, x] = True
            assert np.array_equal(impl.fill_holes(mask), expected)


def test_drop_small_components_matches_flood_oracle():
    rng = np.random.default_rng(16)
    for impl in BACKENDS:
        for _ in range(10):
            h, w = rng.integers(4, 24, size=2)
            mask = rng.random((h, w)) < rng.uniform(0.15, 0.6)
            min_area = int(rng.integers(1, 9))
            expected = mask.copy()
            for comp in _flood_components(mask, diag=True):
                if len(comp) < min_area:
                    for y, x in comp:
                        expected[y, x] = False
            assert np.array_equal(impl.drop_small_components(mask, min_area), expected)


def test_diagonal_only_bridge_survives_component_filter():
    # 8-connectivity joins the two diagonal pixels into one component of 2
    mask = np.zeros((5, 5), bool)
    mask[1, 1] = mask[2, 2] = True
    for impl in BACKENDS:
        assert impl.drop_small_components(mask, 2).sum() == 2
        assert impl.drop_small_components(mask, 3).sum() == 0


@pytest.mark.parametrize("impl", BACKENDS, ids=["numpy", "numba"])
def test_median_fill_single_pixel_uses_masked_window_median(impl):
    rng = np.random.default_rng(17)
    img = rng.random((9, 9, 3)).astype(np.float32)
    occ = np.zeros((9, 9), bool)
    occ[4, 4] = True
    out, remaining = impl.median_fill(img, occ, 100)
    assert remaining == 0
    window = img[2:7, 2:7].reshape(25, 3)
    known = np.delete(window, 12, axis=0).astype(np.float64)  # 24 values: even count
    for ch in range(3):
        vals = np.sort(known[:, ch])
        expected = np.float32(0.5 * (vals[11] + vals[12]))
        assert out[4, 4, ch] == expected
    # everything else is untouched, bit for bit
    keep = ~occ
    assert np.array_equal(out[keep], img[keep])


@pytest.mark.parametrize("impl", BACKENDS, ids=["numpy", "numba"])
def test_median_fill_respects_wave_budget(impl):
    rng = np.random.default_rng(18)
    img = rng.random((20, 20, 3)).astype(np.float32)
    occ = np.zeros((20, 20), bool)
    occ[4:16, 4:16] = True  # 12x12 block needs several waves
    out_zero, remaining_zero = impl.median_fill(img, occ, 0)
    assert remaining_zero == int(occ.sum())
    assert np.array_equal(out_zero, img)
    out_one, remaining_one = impl.median_fill(img, occ, 1)
    assert 0 < remaining_one < int(occ.sum())
    out_full, remaining_full = impl.median_fill(img, occ, 100)
    assert remaining_full == 0
    # the first wave of the full run matches the single-wave run
    assigned = occ & ~np.isclose(out_one, img).all(axis=2)
    assert np.array_equal(out_full[assigned], out_one[assigned])


def test_median_fill_backends_agree():
    rng = np.random.default_rng(19)
    for _ in range(4):
        img = rng.random((16, 16, 3)).astype(np.float32)
        occ = rng.random((16, 16)) < 0.25
        a, ra = numpy_impl.median_fill(img, occ, 100)
        b, rb = numba_impl.median_fill(img, occ, 100)
        assert ra == rb
        assert np.array_equal(a, b)


def test_min_mse_scan_matches_pairwise_oracle():
    rng = np.random.default_rng(20)
    for impl in BACKENDS:
        gen = rng.random((7, 40))
        corpus = rng.random((30, 40))
        idx, best = impl.min_mse_scan(gen, corpus)
        for i in range(gen.shape[0]):
            mses = [float(np.mean((corpus[j] - gen[i]) ** 2)) for j in range(30)]
            assert idx[i] == int(np.argmin(mses))
            assert best[i] == pytest.approx(min(mses), abs=1e-15)


def test_min_mse_scan_ties_pick_lowest_index():
    row = np.linspace(0.0, 1.0, 24)
    corpus = np.stack([row + 1.0, row, row + 0.5, row])  # rows 1 and 3 tie exactly
    gen = row[None, :]
    for impl in BACKENDS:
        idx, best = impl.min_mse_scan(gen, corpus)
        assert idx[0] == 1
        assert best[0] == 0.0
