"""Image I/O, color conversion, resizing, and the 7-channel network input stack.

Images are numpy float32 arrays in [0,1]: (H, W, 3) for color, (H, W) for
single channel. The 7-channel stack is channel-major (7, H, W) because that
is the layout consumed downstream and written to .d7st files.
"""

import struct

import numpy as np
from PIL import Image as _PILImage
from PIL import UnidentifiedImageError

STACK_SIZE = 380
STACK_CHANNELS = 7
STACK_MAGIC = b"D7ST"

# sRGB -> XYZ (D65) luminance row
_Y_WEIGHTS = np.array([0.2126729, 0.7151522, 0.0721750])
_LSTAR_EPS = (6.0 / 29.0) ** 3
_LSTAR_KAPPA = (29.0 / 3.0) ** 3


class ImageError(Exception):
    """Unreadable, unsupported, or malformed image data."""


def _require_rgb(img):
    a = np.asarray(img)
    if a.ndim != 3 or a.shape[2] != 3:
        raise ValueError(f"expected a 3-channel image, got shape {a.shape}")
    return a.astype(np.float64, copy=False)


def load_image(path):
    """Decode an 8-bit PNG or JPEG into a (H, W, 3) float32 array in [0,1]."""
    try:
        with _PILImage.open(path) as im:
            if im.format not in ("PNG", "JPEG"):
                raise ImageError(f"{path}: unsupported format {im.format!r} (PNG/JPEG only)")
            if im.mode.startswith("I") or im.mode == "F" or ";16" in im.mode:
                raise ImageError(f"{path}: only 8-bit images are supported (mode {im.mode!r})")
            if im.mode in ("RGBA", "LA", "PA"):
                raise ImageError(f"{path}: alpha channels are not supported (mode {im.mode!r})")
            if im.mode != "RGB":
                im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.uint8)
    except FileNotFoundError as e:
        raise ImageError(f"{path}: {e.strerror or 'file not found'}") from e
    except UnidentifiedImageError as e:
        raise ImageError(f"{path}: not a decodable image") from e
    except OSError as e:
        raise ImageError(f"{path}: {e}") from e
    return (arr.astype(np.float32) / 255.0).reshape(arr.shape[0], arr.shape[1], 3)


def save_image(img, path):
    """Encode a float image in [0,1] as an 8-bit PNG."""
    a = np.asarray(img)
    if a.ndim == 2:
        a = a[:, :, None].repeat(3, axis=2)
    u8 = np.rint(np.clip(a, 0.0, 1.0) * 255.0).astype(np.uint8)
    try:
        _PILImage.fromarray(u8, mode="RGB").save(path, format="PNG")
    except OSError as e:
        raise ImageError(f"{path}: {e}") from e


def rgb_to_hsv(img):
    """Hexcone RGB -> HSV with all three channels scaled to [0,1] (H = angle/360)."""
    rgb = _require_rgb(img)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = rgb.max(axis=-1)
    minc = rgb.min(axis=-1)
    delta = maxc - minc
    chrom = delta > 0

    s = np.zeros_like(maxc)
    np.divide(delta, maxc, out=s, where=maxc > 0)

    dsafe = np.where(chrom, delta, 1.0)
    h = np.zeros_like(maxc)
    is_r = chrom & (maxc == r)
    is_g = chrom & (maxc == g) & ~is_r
    is_b = chrom & ~is_r & ~is_g
    h[is_r] = np.mod((g - b)[is_r] / dsafe[is_r], 6.0)
    h[is_g] = (b - r)[is_g] / dsafe[is_g] + 2.0
    h[is_b] = (r - g)[is_b] / dsafe[is_b] + 4.0
    h /= 6.0

    return np.stack([h, s, maxc], axis=-1).astype(np.float32)


def hsv_to_rgb(img):
    """Inverse of rgb_to_hsv (H, S, V all in [0,1])."""
    hsv = _require_rgb(img)
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    h6 = (h % 1.0) * 6.0
    sector = np.floor(h6).astype(int) % 6
    f = h6 - np.floor(h6)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    choices = [
        (v, t, p),
        (q, v, p),
        (p, v, t),
        (p, q, v),
        (t, p, v),
        (v, p, q),
    ]
    r = np.choose(sector, [c[0] for c in choices])
    g = np.choose(sector, [c[1] for c in choices])
    b = np.choose(sector, [c[2] for c in choices])
    return np.stack([r, g, b], axis=-1).astype(np.float32)


def luv_luminance(img):
    """L* of CIELUV (D65 white) from sRGB, scaled from [0,100] to [0,1]."""
    rgb = _require_rgb(img)
    linear = np.where(rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4)
    y = linear @ _Y_WEIGHTS
    lstar = np.where(y > _LSTAR_EPS, 116.0 * np.cbrt(y) - 16.0, _LSTAR_KAPPA * y)
    return (lstar / 100.0).astype(np.float32)


def _axis_coords(n_src, n_dst):
    # half-pixel-center sampling; exact identity when n_src == n_dst
    x = (np.arange(n_dst) + 0.5) * (n_src / n_dst) - 0.5
    np.clip(x, 0.0, float(n_src - 1), out=x)
    i0 = np.floor(x).astype(np.int64)
    i1 = np.minimum(i0 + 1, n_src - 1)
    return i0, i1, x - i0


def resize(img, width, height):
    """Bilinear resize to (height, width); preserves constants exactly."""
    if width < 1 or height < 1:
        raise ValueError(f"resize target must be positive, got {width}x{height}")
    a = np.asarray(img, dtype=np.float64)
    flat = a.ndim == 2
    if flat:
        a = a[:, :, None]
    h_src, w_src = a.shape[:2]
    i0, i1, ty = _axis_coords(h_src, height)
    rows = a[i0] + ty[:, None, None] * (a[i1] - a[i0])
    j0, j1, tx = _axis_coords(w_src, width)
    out = rows[:, j0] + tx[None, :, None] * (rows[:, j1] - rows[:, j0])
    out = out.astype(np.float32)
    return out[:, :, 0] if flat else out


def stack_seven(img, size=STACK_SIZE):
    """Build the normalized 7-channel input stack (7, size, size).

    Channel order [R, G, B, H, S, V, L]. Conversions run at the native
    resolution, then every channel is resized and mapped through
    (x - 0.5) / 0.5, so outputs lie in [-1, 1].
    """
    rgb = _require_rgb(img).astype(np.float32)
    hsv = rgb_to_hsv(rgb)
    lum = luv_luminance(rgb)
    channels = [rgb[..., i] for i in range(3)] + [hsv[..., i] for i in range(3)] + [lum]
    resized = [resize(c, size, size) for c in channels]
    stack = np.stack(resized, axis=0)
    return (stack - np.float32(0.5)) / np.float32(0.5)


def write_seven_stack(stack, path):
    """Write a (7, H, W) stack as D7ST: magic, u32 width, u32 height, then
    little-endian float32 data in channel-major order."""
    a = np.asarray(stack, dtype=np.float32)
    if a.ndim != 3 or a.shape[0] != STACK_CHANNELS:
        raise ValueError(f"expected a ({STACK_CHANNELS}, H, W) stack, got shape {a.shape}")
    h, w = a.shape[1], a.shape[2]
    with open(path, "wb") as f:
        f.write(STACK_MAGIC)
        f.write(struct.pack("<II", w, h))
        f.write(a.astype("<f4").tobytes(order="C"))


def read_seven_stack(path):
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != STACK_MAGIC:
            raise ImageError(f"{path}: bad magic {magic!r}")
        w, h = struct.unpack("<II", f.read(8))
        data = np.frombuffer(f.read(), dtype="<f4")
    expected = STACK_CHANNELS * h * w
    if data.size != expected:
        raise ImageError(f"{path}: truncated stack ({data.size} floats, expected {expected})")
    return data.reshape(STACK_CHANNELS, h, w).copy()
