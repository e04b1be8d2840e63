"""dermaprep command line: dataset preparation stages behind one binary.

Exit codes: 0 success, 1 domain finding (shape mismatch, duplicate,
infeasible plan, failed rows), 2 I/O failure, 3 config/usage/parse error.
Commands never mutate inputs; outputs land under --out. Re-runs with the
same inputs, config, and seed are byte-identical.
"""

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

EXIT_OK = 0
EXIT_FINDING = 1
EXIT_IO = 2
EXIT_CONFIG = 3

log = logging.getLogger("dermaprep")


class _Parser(argparse.ArgumentParser):
    # usage problems are config errors (3), not I/O errors
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_CONFIG)


def _thread_cap(args):
    if args.threads is not None:
        n = args.threads
    else:
        n = int(os.environ.get("DERMAPREP_THREADS", "4"))
    if n < 1:
        raise ValueError(f"thread cap must be >= 1, got {n}")
    return n


def _need_out(args):
    if not args.out:
        raise ValueError("this command requires --out")
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _load_cfg(args):
    from .config import PipelineConfig, load_config, with_seed

    cfg = load_config(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        cfg = with_seed(cfg, args.seed)
    return cfg


def cmd_purify(args, cfg):
    from . import manifest as mf
    from .imaging import load_image, save_image
    from .maskops import load_mask, save_mask
    from .purify import purify

    out_dir = _need_out(args)
    rows = mf.read_manifest(args.manifest)
    if not rows:
        mf.write_manifest([], os.path.join(out_dir, "manifest.csv"))
        log.info("purify: empty manifest, nothing to do")
        return EXIT_OK

    def work(row):
        t0 = time.perf_counter()
        src = mf.resolve(row.path, args.manifest)
        img = load_image(src)
        if row.mask_path:
            lesion = load_mask(mf.resolve(row.mask_path, args.manifest))
        else:
            lesion = np.zeros(img.shape[:2], dtype=bool)
        cleaned, occ = purify(img, lesion, cfg.purify)
        out_name = f"{row.image_id}.png"
        save_image(cleaned, os.path.join(out_dir, out_name))
        if args.emit_mask:
            save_mask(occ, os.path.join(out_dir, f"{row.image_id}.occ.png"))
        mask_rel = (
            os.path.relpath(mf.resolve(row.mask_path, args.manifest), out_dir)
            if row.mask_path
            else ""
        )
        dur = time.perf_counter() - t0
        log.info("purify id=%s dur=%.3fs outcome=ok", row.image_id, dur)
        return mf.ManifestRow(row.image_id, out_name, row.class_label, "purified", mask_rel)

    out_rows = []
    failures = 0
    with ThreadPoolExecutor(max_workers=_thread_cap(args)) as pool:
        for row, res in zip(rows, pool.map(lambda r: _guard(work, r), rows)):
            if isinstance(res, Exception):
                failures += 1
                log.error("purify id=%s outcome=error: %s", row.image_id, res)
            else:
                out_rows.append(res)

    mf.write_manifest(out_rows, os.path.join(out_dir, "manifest.csv"))
    counts = mf.class_counts(out_rows)
    summary = ", ".join(f"{n} cases of {c}" for c, n in counts.items())
    print(f"purified {summary}" if summary else "purified nothing")
    if failures:
        log.error("purify: %d row(s) failed", failures)
        return EXIT_FINDING
    return EXIT_OK


def _guard(fn, *a):
    try:
        return fn(*a)
    except Exception as e:  # per-row isolation; the run continues
        return e


def cmd_mask_post(args, cfg):
    from .maskops import fill_holes, load_mask, save_mask

    out_dir = _need_out(args)
    try:
        names = sorted(n for n in os.listdir(args.mask_dir) if n.lower().endswith(".png"))
    except OSError as e:
        log.error("mask-post: %s", e)
        return EXIT_IO
    for name in names:
        t0 = time.perf_counter()
        m = load_mask(os.path.join(args.mask_dir, name))
        save_mask(fill_holes(m), os.path.join(out_dir, name))
        log.info("mask-post id=%s dur=%.3fs outcome=ok", name, time.perf_counter() - t0)
    print(f"filled {len(names)} mask(s)")
    return EXIT_OK


def cmd_arch_verify(args, cfg):
    from .archcheck import (
        ShapeCollapseError,
        format_trace,
        load_builtin,
        parse_arch_file,
        trace,
        verify_coupling,
    )

    if os.path.exists(args.spec):
        specs = parse_arch_file(args.spec)
    else:
        specs = load_builtin(args.spec.removesuffix(".arch"))

    finding = False
    traces = []
    for spec in specs:
        try:
            t = trace(spec)
        except ShapeCollapseError as e:
            print(f"{spec.name}: shape collapse: {e}")
            finding = True
            continue
        traces.append(t)
        print(format_trace(t))
        for lt in t.mismatches():
            finding = True
            declared = "x".join(str(v) for v in lt.layer.declared_out)
            inferred = "x".join(str(v) for v in lt.out_shape)
            print(f"{t.name}: layer {lt.index} ({lt.layer.kind}) declares {declared}, inferred {inferred}")

    if len(specs) >= 2 and any(l.share for s in specs for l in s.layers):
        violations = verify_coupling(specs)
        if violations:
            finding = True
            for v in violations:
                print(f"coupling {v.tag}: {v.offender} differs from {v.reference}: {v.detail}")
        else:
            tags = {l.share for s in specs for l in s.layers if l.share}
            print(f"coupling: {len(tags)} shared group(s) consistent")

    return EXIT_FINDING if finding else EXIT_OK


def _load_resized_set(rows, manifest_path, resolution):
    from . import manifest as mf
    from .imaging import load_image, resize

    images, ids = [], []
    for row in rows:
        img = load_image(mf.resolve(row.path, manifest_path))
        images.append(resize(img, resolution, resolution))
        ids.append(row.image_id)
    return images, ids


def cmd_dedup(args, cfg):
    from . import manifest as mf
    from .dedup import screen, summarize

    out_dir = _need_out(args)
    gen_rows = mf.read_manifest(args.gen_manifest)
    train_rows = mf.read_manifest(args.train_manifest)
    if not gen_rows or not train_rows:
        raise ValueError("dedup needs non-empty generated and training manifests")
    res = cfg.comparison_resolution
    gen_images, gen_ids = _load_resized_set(gen_rows, args.gen_manifest, res)
    train_images, train_ids = _load_resized_set(train_rows, args.train_manifest, res)

    records = screen(gen_images, gen_ids, train_images, train_ids)
    summary = summarize(records, dup_threshold=cfg.dedup_threshold)

    with open(os.path.join(out_dir, "records.csv"), "w", encoding="utf-8") as f:
        f.write("generated_id,nearest_training_id,mse\n")
        for r in records:
            f.write(f"{r.generated_id},{r.nearest_training_id},{r.mse:.17g}\n")
    with open(os.path.join(out_dir, "histogram.csv"), "w", encoding="utf-8") as f:
        f.write("bin_lo,bin_hi,count\n")
        for i, n in enumerate(summary.counts):
            f.write(f"{summary.bin_edges[i]:.17g},{summary.bin_edges[i + 1]:.17g},{n}\n")
    with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8") as f:
        f.write(f"mse {summary.mean:.6g} ± {summary.std:.6g}\n")
        f.write(f"images {len(records)}\n")
        f.write(f"mean {summary.mean:.17g}\n")
        f.write(f"std {summary.std:.17g}\n")
        f.write(f"threshold {cfg.dedup_threshold:.17g}\n")
        f.write(f"flagged {len(summary.flagged)}\n")
        for gid in summary.flagged:
            f.write(f"duplicate {gid}\n")

    print(
        f"dedup: {len(records)} generated vs {len(train_ids)} training; "
        f"mse mean {summary.mean:.5f} std {summary.std:.5f}; {len(summary.flagged)} flagged"
    )
    for gid in summary.flagged:
        log.info("dedup id=%s outcome=flagged", gid)
    return EXIT_FINDING if summary.flagged else EXIT_OK


def _parse_stage_targets(pairs):
    targets = {}
    for p in pairs or []:
        if "=" not in p:
            raise ValueError(f"--stage-target expects CLASS=N, got {p!r}")
        c, n = p.split("=", 1)
        try:
            targets[c.strip()] = int(n)
        except ValueError:
            raise ValueError(f"--stage-target {p!r}: count must be an integer") from None
    return targets or None


def _print_plan(plan):
    head = f"{'class':<24}{'base':>7}{'purified':>9}{'generated':>10}{'pool':>7}{'stage':>7}{'final':>8}"
    print(head)
    for p in plan.classes.values():
        print(
            f"{p.class_label:<24}{p.base_count:>7}{p.purified_added:>9}"
            f"{p.generated_added:>10}{p.pool:>7}{p.flip_h_target:>7}{p.final_target:>8}"
        )
    print(
        f"total final {plan.total_final} (x{plan.multiplier}); "
        f"generated fraction {plan.generated_fraction:.2%}"
    )


def _merged_for_augment(args):
    from . import manifest as mf

    rows = mf.read_manifest(args.manifest)
    gen_rows = mf.read_manifest(args.generated_manifest) if args.generated_manifest else []
    main_classes = {r.class_label for r in rows}
    missing = sorted({r.class_label for r in gen_rows} - main_classes)
    if missing:
        from .config import ConfigError

        raise ConfigError(f"generated manifest adds classes missing from the manifest: {missing}")
    ids = {r.image_id for r in rows}
    clash = [r.image_id for r in gen_rows if r.image_id in ids]
    if clash:
        raise ValueError(f"generated manifest reuses image_ids: {clash[:5]}")
    return rows, gen_rows


def cmd_plan(args, cfg):
    from .augment import plan_balance

    rows, gen_rows = _merged_for_augment(args)
    plan = plan_balance(rows + gen_rows, {}, cfg.multiplier, _parse_stage_targets(args.stage_target))
    _print_plan(plan)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "plan.csv"), "w", encoding="utf-8") as f:
            f.write("class_label,base,purified,generated,pool,stage_target,final_target\n")
            for p in plan.classes.values():
                f.write(
                    f"{p.class_label},{p.base_count},{p.purified_added},"
                    f"{p.generated_added},{p.pool},{p.flip_h_target},{p.final_target}\n"
                )
    return EXIT_OK


def cmd_augment(args, cfg):
    from . import manifest as mf
    from .augment import InfeasiblePlanError, apply_plan, plan_balance

    out_dir = _need_out(args)
    rows, gen_rows = _merged_for_augment(args)
    merged = rows + gen_rows
    plan = plan_balance(merged, {}, cfg.multiplier, _parse_stage_targets(args.stage_target))
    _print_plan(plan)

    # generated rows resolve relative to their own manifest; rebase them
    rebased = [
        mf.ManifestRow(
            r.image_id,
            os.path.relpath(
                mf.resolve(r.path, args.generated_manifest),
                os.path.dirname(os.path.abspath(args.manifest)) or ".",
            ),
            r.class_label,
            r.provenance,
            r.mask_path,
        )
        for r in gen_rows
    ]
    try:
        out_rows = apply_plan(rows + rebased, plan, cfg.seed, out_dir, args.manifest)
    except InfeasiblePlanError as e:
        for c, msg in e.per_class.items():
            print(f"infeasible: {c}: {msg}")
        return EXIT_FINDING
    mf.write_manifest(out_rows, os.path.join(out_dir, "manifest.csv"))
    print(f"augment: wrote {len(out_rows)} rows")
    return EXIT_OK


_SPEC_LEVELS = (0.82, 0.89, 0.95)


def cmd_eval(args, cfg):
    from .metrics import (
        accuracy,
        auc,
        confusion,
        mean_auc,
        read_predictions,
        roc,
        specificity_at_sensitivity,
    )

    classes, preds = read_predictions(args.predictions)
    curves = {c: roc(preds, classes, c) for c in classes}
    aucs = {c: auc(curves[c]) for c in classes}
    mean_targets = [c for c in ("melanoma", "seborrheic_keratosis") if c in classes]
    if not mean_targets:
        mean_targets = list(classes)
    mauc = mean_auc(preds, classes, mean_targets)
    cm = confusion(preds, classes)
    acc = accuracy(cm)
    spec_grid = {
        lvl: {c: specificity_at_sensitivity(curves[c], lvl) for c in classes}
        for lvl in _SPEC_LEVELS
    }

    width = max(len(c) for c in classes) + 2
    print("AUC (one-vs-rest):")
    for c in classes:
        print(f"  {c:<{width}}{aucs[c]:.3f}")
    print(f"  mean({', '.join(mean_targets)})  {mauc:.3f}")
    print(f"accuracy: {acc:.3f}")
    print("confusion (rows true, cols predicted):")
    print("  " + " ".join(f"{c:>{width}}" for c in [""] + list(classes)))
    for i, c in enumerate(classes):
        cells = " ".join(f"{int(n):>{width}}" for n in cm.counts[i])
        print(f"  {c:>{width}} {cells}")
    print("specificity at sensitivity:")
    print("  " + " ".join([f"{'level':>6}"] + [f"{c:>{width}}" for c in classes]))
    for lvl in _SPEC_LEVELS:
        cells = " ".join(f"{spec_grid[lvl][c]:>{width}.3f}" for c in classes)
        print(f"  {lvl:>6.2f} {cells}")

    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "auc.csv"), "w", encoding="utf-8") as f:
            f.write("class_label,auc\n")
            for c in classes:
                f.write(f"{c},{aucs[c]:.17g}\n")
            f.write(f"mean({'+'.join(mean_targets)}),{mauc:.17g}\n")
        with open(os.path.join(args.out, "summary.csv"), "w", encoding="utf-8") as f:
            f.write("metric,value\n")
            f.write(f"accuracy,{acc:.17g}\n")
            f.write(f"mean_auc,{mauc:.17g}\n")
        with open(os.path.join(args.out, "confusion.csv"), "w", encoding="utf-8") as f:
            f.write("true_label," + ",".join(classes) + "\n")
            for i, c in enumerate(classes):
                f.write(c + "," + ",".join(str(int(n)) for n in cm.counts[i]) + "\n")
        with open(os.path.join(args.out, "specificity.csv"), "w", encoding="utf-8") as f:
            f.write("sensitivity," + ",".join(classes) + "\n")
            for lvl in _SPEC_LEVELS:
                f.write(f"{lvl}," + ",".join(f"{spec_grid[lvl][c]:.17g}" for c in classes) + "\n")
        for c in classes:
            cv = curves[c]
            with open(os.path.join(args.out, f"roc_{c}.csv"), "w", encoding="utf-8") as f:
                f.write("threshold,fpr,tpr\n")
                for t, x, y in zip(cv.thresholds, cv.fpr, cv.tpr):
                    f.write(f"{t:.17g},{x:.17g},{y:.17g}\n")
    return EXIT_OK


def cmd_stack(args, cfg):
    from .imaging import load_image, stack_seven, write_seven_stack

    out_dir = _need_out(args)
    for path in args.images:
        t0 = time.perf_counter()
        stem = os.path.splitext(os.path.basename(path))[0]
        stack = stack_seven(load_image(path))
        write_seven_stack(stack, os.path.join(out_dir, f"{stem}.d7st"))
        log.info(
            "stack id=%s dur=%.3fs order=convert,resize,normalize outcome=ok",
            stem,
            time.perf_counter() - t0,
        )
    print(f"stacked {len(args.images)} image(s)")
    return EXIT_OK


def _build_parser():
    parser = _Parser(prog="dermaprep", description=__doc__)
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--threads", type=int, help="row-level parallelism cap")
    parser.add_argument("--quiet", action="store_true", help="suppress per-item logs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("purify", help="remove hair/ruler occlusions from manifest images")
    p.add_argument("manifest")
    p.add_argument("--emit-mask", action="store_true", help="write <id>.occ.png beside outputs")
    p.set_defaults(func=cmd_purify)

    p = sub.add_parser("mask-post", help="hole-fill every mask PNG in a directory")
    p.add_argument("mask_dir")
    p.set_defaults(func=cmd_mask_post)

    p = sub.add_parser("arch", help="architecture file tools")
    asub = p.add_subparsers(dest="arch_command", required=True)
    v = asub.add_parser("verify", help="check declared shapes and weight-sharing coupling")
    v.add_argument("spec", help="path to an .arch file or a builtin name")
    v.set_defaults(func=cmd_arch_verify)

    p = sub.add_parser("dedup", help="MSE-screen generated images against training data")
    p.add_argument("gen_manifest")
    p.add_argument("train_manifest")
    p.set_defaults(func=cmd_dedup)

    p = sub.add_parser("plan", help="compute the balancing plan without writing images")
    p.add_argument("manifest")
    p.add_argument("generated_manifest", nargs="?")
    p.add_argument("--stage-target", action="append", metavar="CLASS=N")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("augment", help="balance classes by flips and seeded crops")
    p.add_argument("manifest")
    p.add_argument("generated_manifest", nargs="?")
    p.add_argument("--stage-target", action="append", metavar="CLASS=N")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("eval", help="score a predictions CSV")
    p.add_argument("predictions")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stack", help="export 7-channel .d7st network inputs")
    p.add_argument("images", nargs="+")
    p.set_defaults(func=cmd_stack)

    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(message)s",
    )

    from .archcheck import ArchParseError, ArchError
    from .config import ConfigError
    from .imaging import ImageError
    from .manifest import ManifestError
    from .metrics import MetricsError

    try:
        # arch verify needs no run configuration (and must stay light to start)
        cfg = None if args.func is cmd_arch_verify else _load_cfg(args)
        return args.func(args, cfg)
    except (ConfigError, ArchParseError, MetricsError, ValueError) as e:
        log.error("%s", e)
        return EXIT_CONFIG
    except (ImageError, ManifestError, ArchError, OSError) as e:
        log.error("%s", e)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
