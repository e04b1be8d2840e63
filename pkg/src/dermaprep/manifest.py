"""Dataset manifest CSV: one row per image with id, path, class, provenance.

Columns: image_id, path, class_label, provenance, mask_path. Paths are
relative to the manifest file's directory; mask_path may be empty.
"""

import csv
import os
from dataclasses import dataclass

PROVENANCES = ("original", "purified", "generated", "augmented")
_COLUMNS = ("image_id", "path", "class_label", "provenance", "mask_path")


class ManifestError(Exception):
    pass


@dataclass(frozen=True)
class ManifestRow:
    image_id: str
    path: str
    class_label: str
    provenance: str
    mask_path: str = ""

    def __post_init__(self):
        if not self.image_id:
            raise ManifestError("empty image_id")
        if not self.path:
            raise ManifestError(f"{self.image_id}: empty path")
        if not self.class_label:
            raise ManifestError(f"{self.image_id}: empty class_label")
        if self.provenance not in PROVENANCES:
            raise ManifestError(
                f"{self.image_id}: provenance {self.provenance!r} not in {PROVENANCES}"
            )


def read_manifest(path):
    """Read rows; image_ids must be unique. Paths are kept as written."""
    rows = []
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None or tuple(h.strip() for h in header) != _COLUMNS:
                raise ManifestError(f"{path}: expected header {','.join(_COLUMNS)}")
            for i, rec in enumerate(reader, start=2):
                if not rec or (len(rec) == 1 and not rec[0].strip()):
                    continue
                if len(rec) != len(_COLUMNS):
                    raise ManifestError(f"{path}:{i}: expected {len(_COLUMNS)} fields, got {len(rec)}")
                try:
                    rows.append(ManifestRow(*[v.strip() for v in rec]))
                except ManifestError as e:
                    raise ManifestError(f"{path}:{i}: {e}") from None
    except OSError as e:
        raise ManifestError(f"{path}: {e}") from e
    seen = set()
    for r in rows:
        if r.image_id in seen:
            raise ManifestError(f"{path}: duplicate image_id {r.image_id!r}")
        seen.add(r.image_id)
    return rows


def write_manifest(rows, path):
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(_COLUMNS)
            for r in rows:
                writer.writerow([r.image_id, r.path, r.class_label, r.provenance, r.mask_path])
    except OSError as e:
        raise ManifestError(f"{path}: {e}") from e


def resolve(row_path, manifest_path):
    """Absolute location of a row's file, relative to the manifest."""
    if os.path.isabs(row_path):
        return row_path
    return os.path.normpath(os.path.join(os.path.dirname(os.path.abspath(manifest_path)), row_path))


def class_counts(rows):
    """Per-class row counts in first-appearance class order."""
    counts = {}
    for r in rows:
        counts[r.class_label] = counts.get(r.class_label, 0) + 1
    return counts
