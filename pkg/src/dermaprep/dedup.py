"""Nearest-neighbor MSE screening of generated images against training data.

Every generated image is compared (pixelwise mean squared error in [0,1]
float space) against every training image at a common comparison resolution;
the minimum-MSE training image is its nearest neighbor. Very small minima
indicate the generator memorized a training sample.
"""

from dataclasses import dataclass

import numpy as np

from ._kernels import min_mse_scan

DUP_THRESHOLD = 0.005


@dataclass(frozen=True)
class MseRecord:
    generated_id: str
    nearest_training_id: str
    mse: float


@dataclass
class MseSummary:
    mean: float
    std: float  # population standard deviation
    bin_edges: np.ndarray
    counts: np.ndarray
    flagged: list  # generated_ids with mse < threshold, input order


def mse(a, b):
    """Mean squared error between two equally-shaped float images."""
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"image shapes differ: {x.shape} vs {y.shape}")
    return float(np.mean((x - y) ** 2))


def _flatten(images, what):
    if len(images) == 0:
        raise ValueError(f"{what} is empty")
    shape = np.asarray(images[0]).shape
    flat = np.empty((len(images), int(np.prod(shape))), dtype=np.float64)
    for i, img in enumerate(images):
        a = np.asarray(img, dtype=np.float64)
        if a.shape != shape:
            raise ValueError(f"{what}[{i}] has shape {a.shape}, expected {shape}")
        flat[i] = a.ravel()
    return flat


def nearest(generated, corpus, generated_id="generated", corpus_ids=None):
    """MseRecord for one generated image against a training corpus.

    Ties on MSE resolve to the lowest corpus index.
    """
    return screen([generated], [generated_id], corpus, corpus_ids)[0]


def screen(generated, generated_ids, corpus, corpus_ids=None):
    """Nearest-neighbor records for a batch of generated images."""
    if len(generated) != len(generated_ids):
        raise ValueError("generated and generated_ids lengths differ")
    gflat = np.ascontiguousarray(_flatten(generated, "generated"))
    cflat = np.ascontiguousarray(_flatten(corpus, "corpus"))
    if gflat.shape[1] != cflat.shape[1]:
        raise ValueError(
            f"generated images have {gflat.shape[1]} values per image, corpus has {cflat.shape[1]}"
        )
    idx, vals = min_mse_scan(gflat, cflat)
    records = []
    for gid, j, v in zip(generated_ids, idx, vals):
        cid = corpus_ids[int(j)] if corpus_ids is not None else str(int(j))
        records.append(MseRecord(gid, cid, float(v)))
    return records


def summarize(records, bins=20, dup_threshold=DUP_THRESHOLD):
    """Mean/std, an equal-width histogram over [0, max], and flagged ids."""
    if not records:
        raise ValueError("no records to summarize")
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    values = np.array([r.mse for r in records], dtype=np.float64)
    hi = float(values.max())
    if hi <= 0.0:
        hi = 1.0
    counts, edges = np.histogram(values, bins=bins, range=(0.0, hi))
    flagged = [r.generated_id for r in records if r.mse < dup_threshold]
    return MseSummary(
        mean=float(values.mean()),
        std=float(values.std()),
        bin_edges=edges,
        counts=counts,
        flagged=flagged,
    )
