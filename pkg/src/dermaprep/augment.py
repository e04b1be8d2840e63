"""Class balancing by flips and seeded random crops.

Balancing runs in two stages. The flip stage grows each class to a stage
target by horizontally flipping a deterministic prefix of its images (so a
class can at most double). The multiplier stage then emits, for every staged
image, `multiplier` variants: the identity, a vertical flip, and seeded
random crops. Crop randomness is keyed by (run seed, image id, variant
index), so outputs are reproducible byte-for-byte and independent of
processing order.
"""

import hashlib
import os
from dataclasses import dataclass, field

import numpy as np

from . import manifest as manifest_mod
from .imaging import load_image, resize, save_image

CROP_FRACTION = 0.8  # crop side = ceil(0.8 * side), then resized back


class InfeasiblePlanError(Exception):
    """A stage target outside [pool, 2*pool] for some class."""

    def __init__(self, per_class):
        self.per_class = dict(per_class)
        detail = "; ".join(f"{c}: {msg}" for c, msg in self.per_class.items())
        super().__init__(f"infeasible augmentation plan: {detail}")


def flip_h(img):
    """Mirror about the vertical axis (left-right)."""
    return np.asarray(img)[:, ::-1].copy()


def flip_v(img):
    """Mirror about the horizontal axis (top-bottom)."""
    return np.asarray(img)[::-1].copy()


def random_crop(img, frac, seed):
    """Crop a uniformly-placed window of side ceil(frac*side), resize back.

    frac must lie in (0, 1]; frac == 1 reproduces the input exactly. The
    offset draws come from PCG64(seed): row offset first, then column.
    """
    if not 0.0 < frac <= 1.0:
        raise ValueError(f"crop fraction must be in (0, 1], got {frac}")
    a = np.asarray(img)
    h, w = a.shape[:2]
    ch = int(np.ceil(frac * h))
    cw = int(np.ceil(frac * w))
    if ch < 1 or cw < 1:
        raise ValueError(f"crop window collapses to {ch}x{cw}")
    rng = np.random.Generator(np.random.PCG64(seed))
    oy = int(rng.integers(0, h - ch + 1))
    ox = int(rng.integers(0, w - cw + 1))
    crop = a[oy : oy + ch, ox : ox + cw]
    if ch == h and cw == w:
        return crop.copy()
    return resize(crop, w, h)


def derive_seed(seed, image_id, k):
    """Stable per-(image, variant) seed from the run seed."""
    digest = hashlib.blake2b(f"{seed}|{image_id}|{k}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class ClassPlan:
    class_label: str
    base_count: int  # provenance "original"
    purified_added: int
    generated_added: int
    pool: int  # all source rows incl. generated
    flip_h_target: int  # class size after the flip stage
    final_target: int  # flip_h_target * multiplier


@dataclass
class AugPlan:
    multiplier: int
    classes: dict = field(default_factory=dict)  # label -> ClassPlan, insertion order

    @property
    def total_final(self):
        return sum(p.final_target for p in self.classes.values())

    @property
    def generated_fraction(self):
        """Estimated share of generated-origin images in the final set.

        Proportional estimate: each source image contributes
        final_target / pool outputs on average.
        """
        total = self.total_final
        if total == 0:
            return 0.0
        gen = sum(
            p.generated_added * (p.final_target / p.pool)
            for p in self.classes.values()
            if p.pool > 0
        )
        return gen / total


def plan_balance(rows, generated, multiplier, stage_targets=None):
    """Build an AugPlan from manifest rows plus per-class generated counts.

    The flip-stage target for a class receiving generated images is
    min(2 * pool, largest pool over all classes); classes receiving none
    keep their pool size. Explicit `stage_targets` entries override the
    derivation per class. Targets are not clamped here; feasibility is
    checked when the plan is applied.
    """
    if multiplier < 1:
        raise ValueError(f"multiplier must be >= 1, got {multiplier}")
    classes = []
    for r in rows:
        if r.class_label not in classes:
            classes.append(r.class_label)
    if not classes:
        raise ValueError("manifest has no rows to plan from")
    unknown = sorted(set(generated) - set(classes))
    if unknown:
        raise ValueError(f"generated counts for classes not in the manifest: {unknown}")
    if any(v < 0 for v in generated.values()):
        raise ValueError("generated counts must be >= 0")
    if stage_targets:
        unknown = sorted(set(stage_targets) - set(classes))
        if unknown:
            raise ValueError(f"stage targets for classes not in the manifest: {unknown}")

    counts = {c: {"original": 0, "purified": 0, "generated": 0, "augmented": 0} for c in classes}
    for r in rows:
        counts[r.class_label][r.provenance] += 1

    pools = {
        c: sum(counts[c].values()) + generated.get(c, 0)
        for c in classes
    }
    max_pool = max(pools.values())

    plan = AugPlan(multiplier=multiplier)
    for c in classes:
        gen_added = counts[c]["generated"] + generated.get(c, 0)
        if stage_targets and c in stage_targets:
            ft = int(stage_targets[c])
        elif gen_added > 0:
            ft = min(2 * pools[c], max_pool)
        else:
            ft = pools[c]
        plan.classes[c] = ClassPlan(
            class_label=c,
            base_count=counts[c]["original"],
            purified_added=counts[c]["purified"],
            generated_added=gen_added,
            pool=pools[c],
            flip_h_target=ft,
            final_target=ft * multiplier,
        )
    return plan


def _variant_chain(flipped, k):
    chain = ["fh"] if flipped else []
    if k == 1:
        chain.append("fv")
    elif k >= 2:
        chain.append(f"c{k}")
    return chain


def apply_plan(rows, plan, seed, out_dir, manifest_path):
    """Materialize a plan: write variant PNGs and return the output rows.

    Source paths resolve relative to `manifest_path`. Identity variants of
    unflipped images reference the original file (no copy); every other
    variant is written to `out_dir` as `<id>__<chain>.png` with provenance
    "augmented". Within a class, images are processed in image_id order and
    the flip-stage prefix is the lexicographically first (flip_h_target - pool)
    ids, so reruns are byte-identical.
    """
    by_class = {}
    for r in rows:
        by_class.setdefault(r.class_label, []).append(r)

    problems = {}
    for c, p in plan.classes.items():
        pool = len(by_class.get(c, []))
        if p.flip_h_target < pool:
            problems[c] = f"target {p.flip_h_target} below pool {pool}"
        elif p.flip_h_target > 2 * pool:
            problems[c] = f"target {p.flip_h_target} exceeds 2x pool {pool}"
    extra = sorted(set(by_class) - set(plan.classes))
    if extra:
        raise ValueError(f"manifest classes missing from the plan: {extra}")
    if problems:
        raise InfeasiblePlanError(problems)

    os.makedirs(out_dir, exist_ok=True)
    out_rows = []
    for c, p in plan.classes.items():
        srcs = sorted(by_class.get(c, []), key=lambda r: r.image_id)
        n_flip = p.flip_h_target - len(srcs)
        staged = [(r, False) for r in srcs] + [(r, True) for r in srcs[:n_flip]]
        for row, flipped in staged:
            src_abs = manifest_mod.resolve(row.path, manifest_path)
            stage_id = row.image_id + ("__fh" if flipped else "")
            base = None
            for k in range(plan.multiplier):
                chain = _variant_chain(flipped, k)
                if not chain:
                    out_rows.append(
                        manifest_mod.ManifestRow(
                            image_id=row.image_id,
                            path=os.path.relpath(src_abs, out_dir),
                            class_label=row.class_label,
                            provenance=row.provenance,
                            mask_path=row.mask_path,
                        )
                    )
                    continue
                if base is None:
                    base = load_image(src_abs)
                    if flipped:
                        base = flip_h(base)
                img = base
                if k == 1:
                    img = flip_v(img)
                elif k >= 2:
                    img = random_crop(img, CROP_FRACTION, derive_seed(seed, stage_id, k))
                out_id = f"{row.image_id}__{'-'.join(chain)}"
                fname = f"{out_id}.png"
                save_image(img, os.path.join(out_dir, fname))
                out_rows.append(
                    manifest_mod.ManifestRow(
                        image_id=out_id,
                        path=fname,
                        class_label=row.class_label,
                        provenance="augmented",
                        mask_path="",
                    )
                )
    return out_rows
