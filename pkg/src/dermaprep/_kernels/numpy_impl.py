"""Pure-numpy fallback implementations of the pixel kernels.

Conventions shared with the numba backend:

* masks are 2-d bool arrays, images are float32 (2-d gray or HxWxC);
* structuring elements arrive as two int64 offset vectors (dy, dx);
* binary morphology pads with False outside the frame, grayscale
  morphology reduces over in-bounds taps only;
* hole filling uses 4-connected background, component filtering uses
  8-connected foreground.
"""

import numpy as np

BACKEND = "numpy"


def _dest_src_slices(h, w, dy, dx):
    # destination region whose tap (y+dy, x+dx) stays in bounds
    y0, y1 = max(0, -dy), min(h, h - dy)
    x0, x1 = max(0, -dx), min(w, w - dx)
    if y0 >= y1 or x0 >= x1:
        return None
    return (slice(y0, y1), slice(x0, x1)), (slice(y0 + dy, y1 + dy), slice(x0 + dx, x1 + dx))


def binary_dilate(mask, dys, dxs):
    h, w = mask.shape
    out = np.zeros_like(mask)
    for dy, dx in zip(dys, dxs):
        sl = _dest_src_slices(h, w, int(dy), int(dx))
        if sl is None:
            continue
        dest, src = sl
        out[dest] |= mask[src]
    return out


def binary_erode(mask, dys, dxs):
    h, w = mask.shape
    out = np.ones_like(mask)
    for dy, dx in zip(dys, dxs):
        tap = np.zeros_like(mask)
        sl = _dest_src_slices(h, w, int(dy), int(dx))
        if sl is not None:
            dest, src = sl
            tap[dest] = mask[src]
        out &= tap
    return out


def gray_dilate(img, dys, dxs):
    h, w = img.shape
    acc = np.full((h, w), -np.inf, dtype=np.float64)
    for dy, dx in zip(dys, dxs):
        sl = _dest_src_slices(h, w, int(dy), int(dx))
        if sl is None:
            continue
        dest, src = sl
        np.maximum(acc[dest], img[src], out=acc[dest])
    untouched = np.isneginf(acc)
    acc[untouched] = img[untouched]
    return acc.astype(img.dtype)


def gray_erode(img, dys, dxs):
    h, w = img.shape
    acc = np.full((h, w), np.inf, dtype=np.float64)
    for dy, dx in zip(dys, dxs):
        sl = _dest_src_slices(h, w, int(dy), int(dx))
        if sl is None:
            continue
        dest, src = sl
        np.minimum(acc[dest], img[src], out=acc[dest])
    untouched = np.isposinf(acc)
    acc[untouched] = img[untouched]
    return acc.astype(img.dtype)


def fill_holes(mask):
    """Fill background regions not 4-connected to the border."""
    background = ~mask
    reach = np.zeros_like(mask)
    reach[0, :] = background[0, :]
    reach[-1, :] = background[-1, :]
    reach[:, 0] = background[:, 0]
    reach[:, -1] = background[:, -1]
    while True:
        grown = reach.copy()
        grown[1:, :] |= reach[:-1, :]
        grown[:-1, :] |= reach[1:, :]
        grown[:, 1:] |= reach[:, :-1]
        grown[:, :-1] |= reach[:, 1:]
        grown &= background
        if np.array_equal(grown, reach):
            break
        reach = grown
    return mask | (background & ~reach)


def _label_min_propagate(mask):
    # 8-connected labelling by iterated minimum propagation; slow but simple
    h, w = mask.shape
    sentinel = h * w
    labels = np.where(mask, np.arange(h * w).reshape(h, w), sentinel)
    while True:
        prev = labels
        labels = labels.copy()
        for dy, dx in ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)):
            sl = _dest_src_slices(h, w, dy, dx)
            if sl is None:
                continue
            dest, src = sl
            np.minimum(labels[dest], prev[src], out=labels[dest])
        labels[~mask] = sentinel
        if np.array_equal(labels, prev):
            break
    return labels, sentinel


def drop_small_components(mask, min_area):
    """Clear 8-connected foreground components with fewer than min_area pixels."""
    if not mask.any() or min_area <= 1:
        return mask.copy()
    labels, sentinel = _label_min_propagate(mask)
    flat = labels[mask]
    counts = np.bincount(flat, minlength=sentinel)
    keep = counts[labels.clip(max=sentinel - 1)] >= min_area
    return mask & keep


def median_fill(img, occ, max_waves):
    """Fill occluded pixels by inward waves of 5x5 masked medians.

    Each wave assigns every still-unknown pixel that has at least one known
    5x5 neighbour the per-channel median of those known neighbours, from a
    snapshot taken before the wave. Returns the filled image and the number
    of pixels left unassigned when the wave budget ran out.
    """
    h, w, c = img.shape
    out = img.copy()
    known = ~occ
    offsets = [(dy, dx) for dy in range(-2, 3) for dx in range(-2, 3)]
    for _ in range(max_waves):
        unknown = ~known
        if not unknown.any():
            break
        vals = np.full((h, w, len(offsets), c), np.nan, dtype=np.float64)
        for k, (dy, dx) in enumerate(offsets):
            sl = _dest_src_slices(h, w, dy, dx)
            if sl is None:
                continue
            dest, src = sl
            block = np.where(known[src][..., None], out[src], np.nan)
            vals[dest[0], dest[1], k, :] = block
        has_known = ~np.isnan(vals).all(axis=(2, 3))
        cand = unknown & has_known
        if not cand.any():
            break
        med = np.nanmedian(vals[cand], axis=1)
        out[cand] = med.astype(out.dtype)
        known = known | cand
    return out, int((~known).sum())


def min_mse_scan(gen, corpus):
    """Per generated row, index and value of the minimum MSE over the corpus."""
    n_gen = gen.shape[0]
    idx = np.zeros(n_gen, dtype=np.int64)
    best = np.zeros(n_gen, dtype=np.float64)
    for i in range(n_gen):
        d = corpus.astype(np.float64) - gen[i].astype(np.float64)
        mses = np.mean(d * d, axis=1)
        j = int(np.argmin(mses))
        idx[i] = j
        best[i] = mses[j]
    return idx, best
