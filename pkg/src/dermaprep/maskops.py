"""Binary mask morphology, hole filling, overlap scoring, and mask file I/O.

Masks are boolean (H, W) arrays. Pixels outside the image border are treated
as False by every operation here.
"""

from dataclasses import dataclass, field

import numpy as np
from PIL import Image as _PILImage

from ._kernels import binary_dilate, binary_erode, fill_holes as _fill_holes
from .imaging import ImageError


def _as_mask(m, name="mask"):
    a = np.asarray(m)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if a.dtype != np.bool_:
        a = a.astype(bool)
    return np.ascontiguousarray(a)


@dataclass(frozen=True)
class StructuringElement:
    """A footprint given as integer pixel offsets from the anchor."""

    kind: str
    offsets: tuple = field(repr=False)

    def __post_init__(self):
        if len(self.offsets) == 0:
            raise ValueError("structuring element footprint is empty")

    def arrays(self):
        off = np.asarray(self.offsets, dtype=np.int64).reshape(-1, 2)
        return np.ascontiguousarray(off[:, 0]), np.ascontiguousarray(off[:, 1])


def disk(radius):
    """All offsets with dy^2 + dx^2 <= radius^2 (symmetric about the anchor)."""
    if radius < 0:
        raise ValueError(f"disk radius must be >= 0, got {radius}")
    r = int(radius)
    span = np.arange(-r, r + 1)
    dy, dx = np.meshgrid(span, span, indexing="ij")
    keep = dy * dy + dx * dx <= r * r
    return StructuringElement("disk", tuple(zip(dy[keep].tolist(), dx[keep].tolist())))


def square(radius):
    """A (2*radius+1)^2 box of offsets."""
    if radius < 0:
        raise ValueError(f"square radius must be >= 0, got {radius}")
    r = int(radius)
    span = range(-r, r + 1)
    return StructuringElement("square", tuple((dy, dx) for dy in span for dx in span))


def line(length, angle_deg):
    """A digital line element of `length` samples centred on the anchor.

    Sample points are rounded to the pixel grid and de-duplicated, so the
    footprint of e.g. a short diagonal may hold fewer than `length` pixels.
    """
    if length < 1:
        raise ValueError(f"line length must be >= 1, got {length}")
    ts = np.arange(length, dtype=np.float64) - (length - 1) / 2.0
    rad = np.deg2rad(float(angle_deg))
    dys = np.rint(ts * np.sin(rad)).astype(np.int64)
    dxs = np.rint(ts * np.cos(rad)).astype(np.int64)
    seen = dict.fromkeys(zip(dys.tolist(), dxs.tolist()))
    return StructuringElement("line", tuple(seen))


def dilate(mask, se):
    m = _as_mask(mask)
    dy, dx = se.arrays()
    return binary_dilate(m, dy, dx)


def erode(mask, se):
    m = _as_mask(mask)
    dy, dx = se.arrays()
    return binary_erode(m, dy, dx)


def close(mask, se):
    """Dilation followed by erosion with the same element."""
    return erode(dilate(mask, se), se)


def fill_holes(mask):
    """Fill false regions not 4-connected to the image border."""
    return _fill_holes(_as_mask(mask))


def jaccard(a, b):
    """|a & b| / |a | b|; two empty masks score 1.0 by convention."""
    a = _as_mask(a, "a")
    b = _as_mask(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def jaccard_mean(pairs):
    """Mean of per-pair Jaccard scores over an iterable of (a, b)."""
    scores = [jaccard(a, b) for a, b in pairs]
    if not scores:
        raise ValueError("no mask pairs given")
    return float(np.mean(scores))


def jaccard_pooled(pairs):
    """Jaccard of the pooled intersection/union counts across all pairs."""
    inter = 0
    union = 0
    n = 0
    for a, b in pairs:
        a = _as_mask(a, "a")
        b = _as_mask(b, "b")
        if a.shape != b.shape:
            raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
        inter += np.count_nonzero(a & b)
        union += np.count_nonzero(a | b)
        n += 1
    if n == 0:
        raise ValueError("no mask pairs given")
    return 1.0 if union == 0 else inter / union


def load_mask(path):
    """Read a mask PNG; any pixel with value >= 128 is True."""
    try:
        with _PILImage.open(path) as im:
            if im.format != "PNG":
                raise ImageError(f"{path}: masks must be PNG, got {im.format!r}")
            arr = np.asarray(im.convert("L"), dtype=np.uint8)
    except FileNotFoundError as e:
        raise ImageError(f"{path}: {e.strerror or 'file not found'}") from e
    except OSError as e:
        raise ImageError(f"{path}: {e}") from e
    return arr >= 128


def save_mask(mask, path):
    """Write a mask as an 8-bit PNG with values 0 and 255."""
    m = _as_mask(mask)
    try:
        _PILImage.fromarray(m.astype(np.uint8) * 255, mode="L").save(path, format="PNG")
    except OSError as e:
        raise ImageError(f"{path}: {e}") from e
