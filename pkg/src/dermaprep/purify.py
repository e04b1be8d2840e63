"""Occlusion removal: detect hair/ruler artifacts, shield the lesion, inpaint.

The detector works on the CIELUV lightness plane: thin dark structures are
enhanced with a multi-orientation line bottom-hat (gray closing minus the
original, maximized over a bank of line elements), thresholded, cleaned of
speckle, and bridged with a disk closing. Detected pixels are then filled
with an iterative masked median so untouched pixels pass through bit-exact.
"""

from dataclasses import dataclass

import numpy as np

from .imaging import _require_rgb, luv_luminance

# maskops (and through it the compiled kernels) is imported inside the
# functions that need it, so importing this module for PurifyConfig alone
# stays cheap.

_DEFAULT_LENGTHS = (9, 15, 21)
_DEFAULT_ANGLES = (0.0, 22.5, 45.0, 67.5, 90.0, 112.5, 135.0, 157.5)

# Element sizes below are calibrated for this width and scaled to the input.
REFERENCE_WIDTH = 380


@dataclass(frozen=True)
class PurifyConfig:
    """Knobs for occlusion detection and fill.

    luminance_threshold: "otsu" for a per-image histogram split, or a fixed
        float applied to the bottom-hat response.
    line_lengths / line_angles: the line element bank, lengths in pixels at
        reference_width (scaled proportionally for other image widths).
    closing_radius: disk radius for bridging gaps between detections.
    inpaint_iterations: cap on boundary-inward fill sweeps; pixels still
        unfilled when the cap hits keep their original values.
    min_component_area: detections smaller than this (px^2 at
        reference_width) are dropped as noise.
    """

    luminance_threshold: object = "otsu"
    line_lengths: tuple = _DEFAULT_LENGTHS
    line_angles: tuple = _DEFAULT_ANGLES
    closing_radius: int = 5
    inpaint_iterations: int = 100
    min_component_area: int = 30
    reference_width: int = REFERENCE_WIDTH

    def __post_init__(self):
        if isinstance(self.luminance_threshold, str):
            if self.luminance_threshold != "otsu":
                raise ValueError(
                    f"luminance_threshold must be 'otsu' or a number, got {self.luminance_threshold!r}"
                )
        elif not 0.0 <= float(self.luminance_threshold) <= 1.0:
            raise ValueError("numeric luminance_threshold must lie in [0, 1]")
        if not self.line_lengths:
            raise ValueError("line_lengths is empty")
        if any(n < 3 for n in self.line_lengths):
            raise ValueError("line_lengths must all be >= 3")
        if not self.line_angles:
            raise ValueError("line_angles is empty")
        if self.closing_radius < 0:
            raise ValueError("closing_radius must be >= 0")
        if self.inpaint_iterations < 1:
            raise ValueError("inpaint_iterations must be >= 1")
        if self.min_component_area < 1:
            raise ValueError("min_component_area must be >= 1")
        if self.reference_width < 1:
            raise ValueError("reference_width must be >= 1")


DEFAULT_CONFIG = PurifyConfig()


def _scaled(cfg, width):
    """Scale the element bank from reference_width to an image of `width`."""
    s = width / cfg.reference_width
    lengths = sorted({max(3, int(round(n * s))) for n in cfg.line_lengths})
    radius = max(1, int(round(cfg.closing_radius * s)))
    area = max(1, int(round(cfg.min_component_area * s * s)))
    return lengths, radius, area


def otsu_threshold(values, bins=256):
    """Otsu's between-class-variance split of a value distribution.

    Returns the upper edge of the chosen bin; a constant input returns that
    constant (so `values > t` selects nothing).
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("cannot threshold an empty array")
    lo, hi = float(v.min()), float(v.max())
    if lo == hi:
        return lo
    counts, edges = np.histogram(v, bins=bins, range=(lo, hi))
    w = counts.astype(np.float64)
    total = w.sum()
    centers = 0.5 * (edges[:-1] + edges[1:])
    weight0 = np.cumsum(w)
    weight1 = total - weight0
    mass0 = np.cumsum(w * centers)
    mass1 = mass0[-1] - mass0
    valid = (weight0 > 0) & (weight1 > 0)
    mu0 = np.where(valid, mass0 / np.where(weight0 > 0, weight0, 1), 0.0)
    mu1 = np.where(valid, mass1 / np.where(weight1 > 0, weight1, 1), 0.0)
    between = np.where(valid, weight0 * weight1 * (mu0 - mu1) ** 2, -1.0)
    k = int(np.argmax(between))
    return float(edges[k + 1])


def bottomhat_response(lum, lengths, angles):
    """Max over the line bank of (gray closing - original); >= 0 everywhere."""
    from . import maskops
    from ._kernels import gray_dilate, gray_erode

    img = np.ascontiguousarray(np.asarray(lum, dtype=np.float32))
    response = np.zeros_like(img)
    for length in lengths:
        for angle in angles:
            se = maskops.line(length, angle)
            dy, dx = se.arrays()
            closed = gray_erode(gray_dilate(img, dy, dx), dy, dx)
            np.maximum(response, closed - img, out=response)
    return response


def detect_occlusions(img, cfg=DEFAULT_CONFIG):
    """Boolean mask of thin dark occlusions (hairs, ruler marks)."""
    from . import maskops
    from ._kernels import drop_small_components

    rgb = _require_rgb(img)
    lengths, radius, area = _scaled(cfg, rgb.shape[1])
    lum = luv_luminance(rgb)
    response = bottomhat_response(lum, lengths, cfg.line_angles)
    if cfg.luminance_threshold == "otsu":
        thr = otsu_threshold(response)
    else:
        thr = float(cfg.luminance_threshold)
    mask = response > thr
    mask = drop_small_components(mask, area)
    return maskops.close(mask, maskops.disk(radius))


def protect_lesion(occlusions, lesion_mask, margin_radius=2):
    """Remove detections that fall inside the eroded lesion region."""
    from . import maskops

    occ = maskops._as_mask(occlusions, "occlusions")
    lesion = maskops._as_mask(lesion_mask, "lesion_mask")
    if occ.shape != lesion.shape:
        raise ValueError(f"mask shapes differ: {occ.shape} vs {lesion.shape}")
    core = maskops.erode(lesion, maskops.disk(margin_radius))
    return occ & ~core


def inpaint(img, occlusions, cfg=DEFAULT_CONFIG):
    """Replace masked pixels by iterated 5x5 masked medians.

    Fills boundary-inward: each sweep assigns every masked pixel with at
    least one known 5x5 neighbor the per-channel median of those neighbors.
    Unmasked pixels are returned bit-identical. Pixels still unknown after
    cfg.inpaint_iterations sweeps (possible only for very large masked
    regions) keep their original values.
    """
    from . import maskops
    from ._kernels import median_fill

    rgb = np.ascontiguousarray(_require_rgb(img).astype(np.float32))
    occ = maskops._as_mask(occlusions, "occlusions")
    if occ.shape != rgb.shape[:2]:
        raise ValueError(f"mask shape {occ.shape} does not match image {rgb.shape[:2]}")
    if occ.all():
        raise ValueError("occlusion mask covers the entire image; nothing to fill from")
    filled, _remaining = median_fill(rgb, occ, cfg.inpaint_iterations)
    return filled


def purify(img, lesion_mask, cfg=DEFAULT_CONFIG):
    """Full pipeline: detect, shield the lesion, inpaint.

    Returns (cleaned_image, occlusion_mask) where the mask is the one
    actually inpainted (after lesion protection).
    """
    from . import maskops

    rgb = _require_rgb(img)
    lesion = maskops._as_mask(lesion_mask, "lesion_mask")
    if lesion.shape != rgb.shape[:2]:
        raise ValueError(f"lesion mask shape {lesion.shape} does not match image {rgb.shape[:2]}")
    detected = detect_occlusions(rgb, cfg)
    final = protect_lesion(detected, lesion)
    if not final.any():
        return rgb.astype(np.float32), final
    return inpaint(rgb, final, cfg), final
