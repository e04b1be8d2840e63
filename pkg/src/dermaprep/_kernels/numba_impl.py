"""Numba JIT implementations of the pixel kernels.

Semantics match numpy_impl exactly (same border rules, same connectivity,
same even-count median); the backend-equivalence tests hold both to that.
"""

import numpy as np
from numba import njit

BACKEND = "numba"


@njit(cache=True)
def binary_dilate(mask, dys, dxs):
    h, w = mask.shape
    out = np.zeros_like(mask)
    taps = dys.shape[0]
    n_set = 0
    for y in range(h):
        for x in range(w):
            if mask[y, x]:
                n_set += 1
    # occlusion masks are usually sparse: stamping the reflected footprint
    # around each set pixel does n_set*taps work, while the gather form
    # averages ~pixels/density probes; cross over near n_set = pixels/sqrt(taps)
    if n_set * n_set * taps <= h * w * h * w:
        for y in range(h):
            for x in range(w):
                if mask[y, x]:
                    for k in range(taps):
                        yy = y - dys[k]
                        xx = x - dxs[k]
                        if 0 <= yy < h and 0 <= xx < w:
                            out[yy, xx] = True
    else:
        for y in range(h):
            for x in range(w):
                for k in range(taps):
                    yy = y + dys[k]
                    xx = x + dxs[k]
                    if 0 <= yy < h and 0 <= xx < w and mask[yy, xx]:
                        out[y, x] = True
                        break
    return out


@njit(cache=True)
def binary_erode(mask, dys, dxs):
    h, w = mask.shape
    out = np.zeros_like(mask)
    for y in range(h):
        for x in range(w):
            ok = True
            for k in range(dys.shape[0]):
                yy = y + dys[k]
                xx = x + dxs[k]
                if yy < 0 or yy >= h or xx < 0 or xx >= w or not mask[yy, xx]:
                    ok = False
                    break
            out[y, x] = ok
    return out


@njit(cache=True)
def gray_dilate(img, dys, dxs):
    # tap-major sweep with branchless row-contiguous max so the inner loop
    # vectorizes; pixels no tap reached keep their original value
    h, w = img.shape
    acc = np.full((h, w), -np.inf, img.dtype)
    for k in range(dys.shape[0]):
        dy = dys[k]
        dx = dxs[k]
        y0 = max(0, -dy)
        y1 = min(h, h - dy)
        x0 = max(0, -dx)
        x1 = min(w, w - dx)
        for y in range(y0, y1):
            src = img[y + dy]
            dst = acc[y]
            for x in range(x0, x1):
                v = src[x + dx]
                a = dst[x]
                dst[x] = v if v > a else a
    for y in range(h):
        for x in range(w):
            if acc[y, x] == -np.inf:
                acc[y, x] = img[y, x]
    return acc


@njit(cache=True)
def gray_erode(img, dys, dxs):
    h, w = img.shape
    acc = np.full((h, w), np.inf, img.dtype)
    for k in range(dys.shape[0]):
        dy = dys[k]
        dx = dxs[k]
        y0 = max(0, -dy)
        y1 = min(h, h - dy)
        x0 = max(0, -dx)
        x1 = min(w, w - dx)
        for y in range(y0, y1):
            src = img[y + dy]
            dst = acc[y]
            for x in range(x0, x1):
                v = src[x + dx]
                a = dst[x]
                dst[x] = v if v < a else a
    for y in range(h):
        for x in range(w):
            if acc[y, x] == np.inf:
                acc[y, x] = img[y, x]
    return acc


@njit(cache=True)
def _flood(mask, seed_y, seed_x, visited, stack, diag):
    # iterative flood fill over `mask`; returns pixels reached from the seed
    h, w = mask.shape
    top = 0
    stack[top, 0] = seed_y
    stack[top, 1] = seed_x
    top += 1
    visited[seed_y, seed_x] = True
    count = 0
    while top > 0:
        top -= 1
        y = stack[top, 0]
        x = stack[top, 1]
        count += 1
        for dy in range(-1, 2):
            for dx in range(-1, 2):
                if dy == 0 and dx == 0:
                    continue
                if not diag and dy != 0 and dx != 0:
                    continue
                yy = y + dy
                xx = x + dx
                if 0 <= yy < h and 0 <= xx < w and mask[yy, xx] and not visited[yy, xx]:
                    visited[yy, xx] = True
                    stack[top, 0] = yy
                    stack[top, 1] = xx
                    top += 1
    return count


@njit(cache=True)
def fill_holes(mask):
    h, w = mask.shape
    background = ~mask
    reach = np.zeros((h, w), dtype=np.bool_)
    stack = np.empty((h * w, 2), dtype=np.int64)
    for x in range(w):
        if background[0, x] and not reach[0, x]:
            _flood(background, 0, x, reach, stack, False)
        if background[h - 1, x] and not reach[h - 1, x]:
            _flood(background, h - 1, x, reach, stack, False)
    for y in range(h):
        if background[y, 0] and not reach[y, 0]:
            _flood(background, y, 0, reach, stack, False)
        if background[y, w - 1] and not reach[y, w - 1]:
            _flood(background, y, w - 1, reach, stack, False)
    return mask | (background & ~reach)


@njit(cache=True)
def drop_small_components(mask, min_area):
    h, w = mask.shape
    out = mask.copy()
    if min_area <= 1:
        return out
    visited = np.zeros((h, w), dtype=np.bool_)
    stack = np.empty((h * w, 2), dtype=np.int64)
    members = np.empty((h * w, 2), dtype=np.int64)
    for y0 in range(h):
        for x0 in range(w):
            if not mask[y0, x0] or visited[y0, x0]:
                continue
            top = 0
            stack[top, 0] = y0
            stack[top, 1] = x0
            top += 1
            visited[y0, x0] = True
            count = 0
            while top > 0:
                top -= 1
                y = stack[top, 0]
                x = stack[top, 1]
                members[count, 0] = y
                members[count, 1] = x
                count += 1
                for dy in range(-1, 2):
                    for dx in range(-1, 2):
                        if dy == 0 and dx == 0:
                            continue
                        yy = y + dy
                        xx = x + dx
                        if 0 <= yy < h and 0 <= xx < w and mask[yy, xx] and not visited[yy, xx]:
                            visited[yy, xx] = True
                            stack[top, 0] = yy
                            stack[top, 1] = xx
                            top += 1
            if count < min_area:
                for i in range(count):
                    out[members[i, 0], members[i, 1]] = False
    return out


@njit(cache=True)
def _median_sorted(buf, n):
    sub = np.sort(buf[:n])
    if n % 2 == 1:
        return sub[n // 2]
    return 0.5 * (sub[n // 2 - 1] + sub[n // 2])


@njit(cache=True)
def median_fill(img, occ, max_waves):
    h, w, c = img.shape
    out = img.copy()
    known = ~occ
    buf = np.empty(25, dtype=np.float64)
    for _ in range(max_waves):
        remaining = 0
        for y in range(h):
            for x in range(w):
                if not known[y, x]:
                    remaining += 1
        if remaining == 0:
            break
        nxt = out.copy()
        nxt_known = known.copy()
        assigned = 0
        for y in range(h):
            for x in range(w):
                if known[y, x]:
                    continue
                for ch in range(c):
                    n = 0
                    for dy in range(-2, 3):
                        for dx in range(-2, 3):
                            yy = y + dy
                            xx = x + dx
                            if 0 <= yy < h and 0 <= xx < w and known[yy, xx]:
                                buf[n] = out[yy, xx, ch]
                                n += 1
                    if n == 0:
                        break
                    nxt[y, x, ch] = _median_sorted(buf, n)
                    if ch == c - 1:
                        nxt_known[y, x] = True
                        assigned += 1
        out = nxt
        known = nxt_known
        if assigned == 0:
            break
    remaining = 0
    for y in range(h):
        for x in range(w):
            if not known[y, x]:
                remaining += 1
    return out, remaining


@njit(cache=True)
def min_mse_scan(gen, corpus):
    n_gen = gen.shape[0]
    n_train = corpus.shape[0]
    d = gen.shape[1]
    idx = np.zeros(n_gen, dtype=np.int64)
    best = np.zeros(n_gen, dtype=np.float64)
    for i in range(n_gen):
        best_v = np.inf
        best_j = 0
        for j in range(n_train):
            s = 0.0
            for k in range(d):
                diff = np.float64(corpus[j, k]) - np.float64(gen[i, k])
                s += diff * diff
            v = s / d
            if v < best_v:
                best_v = v
                best_j = j
        idx[i] = best_j
        best[i] = best_v
    return idx, best
