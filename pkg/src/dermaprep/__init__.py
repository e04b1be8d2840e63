"""dermaprep: dataset preparation toolkit for dermoscopic lesion images.

Stages: occlusion removal (purify), mask post-processing (maskops),
architecture shape checking (archcheck), generated-image screening (dedup),
class balancing (augment), classifier scoring (metrics), and 7-channel
network-input export (imaging). The `dermaprep` CLI binds them together.
"""

__version__ = "0.1.0"

__all__ = [
    "archcheck",
    "augment",
    "config",
    "dedup",
    "imaging",
    "manifest",
    "maskops",
    "metrics",
    "purify",
]
