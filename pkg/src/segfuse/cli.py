"""Command-line pipeline driver.

Exit codes: 0 success, 1 domain error (diagnostic on stderr), 2 usage
error. All outputs are deterministic given flags and seed; batch
subcommands may fan out across images with --jobs without changing any
output byte.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from . import fusion, instances, manifest, metrics, privacy, raster
from .errors import SegfuseError, ValidationError


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise ValidationError(f"expected comma-separated numbers, got {text!r}") from None


def _parse_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise ValidationError(f"expected comma-separated integers, got {text!r}") from None


def _load_catalog(path: str | None) -> raster.ClassCatalog:
    if path is None:
        return raster.DEFAULT_CATALOG
    with open(path) as f:
        return raster.ClassCatalog.from_json(json.load(f))


def _png_stems(d: str) -> dict[str, str]:
    if not os.path.isdir(d):
        raise ValidationError(f"{d!r} is not a directory")
    return {
        os.path.splitext(name)[0]: os.path.join(d, name)
        for name in sorted(os.listdir(d))
        if name.endswith(".png")
    }


def _common_stems(dirs: list[str]) -> list[str]:
    stem_sets = [set(_png_stems(d)) for d in dirs]
    common = set.intersection(*stem_sets)
    if not common:
        raise ValidationError("prediction directories share no image stems")
    return sorted(common)


def _map_jobs(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


# --- subcommands ------------------------------------------------------------


def cmd_fuse(args) -> int:
    catalog = _load_catalog(args.catalog)
    dirs = args.pred_dirs.split(",")
    if args.config:
        with open(args.config) as f:
            cfg = fusion.FusionConfig.from_json(json.load(f))
    else:
        if args.weights is None:
            raise ValidationError("either --config or --weights is required")
        methods = (
            tuple(args.methods.split(","))
            if args.methods
            else tuple(os.path.basename(os.path.normpath(d)) for d in dirs)
        )
        cfg = fusion.FusionConfig(methods, _parse_floats(args.weights), alpha=args.alpha)
    if len(dirs) != cfg.num_methods:
        raise ValidationError(f"{len(dirs)} prediction dirs but config has {cfg.num_methods}")
    stems = _common_stems(dirs)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "fusion.json"), "w") as f:
        json.dump(cfg.to_json(), f, indent=2)
        f.write("\n")

    def one(stem: str):
        masks = [raster.read_label_map(_png_stems(d)[stem], catalog) for d in dirs]
        result = fusion.fuse(masks, cfg)
        fusion.save_fused_result(result, os.path.join(args.out, stem), catalog, cfg)
        return stem, result.stats.reliable_fraction

    for stem, frac in _map_jobs(one, stems, args.jobs):
        print(f"{stem}: reliable_fraction={frac:.4f}")
    return 0


def cmd_uncertainty(args) -> int:
    catalog = _load_catalog(args.catalog)
    result = fusion.load_fused_result(args.fused, catalog)
    raster.write_label_map(args.out, fusion.uncertainty_map(result), catalog)
    return 0


def cmd_merge(args) -> int:
    catalog = _load_catalog(args.catalog)
    result = fusion.load_fused_result(args.fused, catalog)
    with open(args.edits) as f:
        edits = [fusion.EditOp.from_json(e) for e in json.load(f)]
    final = fusion.merge_manual(result, edits)
    raster.write_label_map(args.out, final, catalog)
    print(f"wrote {args.out}")
    return 0


def cmd_instances(args) -> int:
    catalog = _load_catalog(args.catalog)
    labels = raster.read_label_map(args.labels, catalog)
    classes = frozenset(_parse_ints(args.classes))
    m = instances.split_instances(labels, classes)
    if args.edits:
        with open(args.edits) as f:
            edits = [instances.instance_edit_from_json(e) for e in json.load(f)]
        m = instances.apply_instance_edits(m, edits)
    instances.save_instance_map(m, args.out + ".png", args.out + ".json")
    print(f"{m.instance_count()} instances -> {args.out}.png / {args.out}.json")
    return 0


def _paired_stems(a: str, b: str) -> list[tuple[str, str, str]]:
    if os.path.isfile(a) and os.path.isfile(b):
        return [(os.path.splitext(os.path.basename(a))[0], a, b)]
    pa, pb = _png_stems(a), _png_stems(b)
    stems = sorted(set(pa) & set(pb))
    if not stems:
        raise ValidationError(f"{a!r} and {b!r} share no image stems")
    return [(s, pa[s], pb[s]) for s in stems]


def cmd_eval_miou(args) -> int:
    catalog = _load_catalog(args.catalog)
    pairs = _paired_stems(args.pred, args.gt)

    def one(item):
        stem, p, g = item
        return stem, metrics.miou(
            raster.read_label_map(p, catalog), raster.read_label_map(g, catalog), args.ignore
        )

    results = _map_jobs(one, pairs, args.jobs)
    aggregate = metrics.merge_iou_reports([r for _, r in results])
    records = []
    for stem, rep in results:
        records.append({"image": stem, "mean_iou": rep.mean_iou})
        print(f"{stem}: mIoU={rep.mean_iou:.4f}")
    print(f"{'class':>14} {'intersection':>12} {'union':>10} {'iou':>8}")
    for c, ciou in aggregate.per_class.items():
        name = catalog.get(c).name if c < len(catalog) else str(c)
        iou = f"{ciou.iou:.4f}" if ciou.iou is not None else "-"
        print(f"{name:>14} {ciou.intersection:>12} {ciou.union:>10} {iou:>8}")
    print(f"aggregate mIoU: {aggregate.mean_iou:.6f}")
    if args.json:
        with open(args.json, "w") as f:
            json.dump({"images": records, "mean_iou": aggregate.mean_iou}, f, indent=2)
            f.write("\n")
    return 0


def cmd_eval_ap(args) -> int:
    classes = frozenset(_parse_ints(args.classes))
    thresholds = tuple(_parse_floats(args.thresholds)) if args.thresholds else None

    def load_dir(d: str) -> dict[str, instances.InstanceMap]:
        out = {}
        for stem, png in _png_stems(d).items():
            table = os.path.join(d, stem + ".json")
            if os.path.exists(table):
                out[stem] = instances.load_instance_map(png, table)
        return out

    pred, gt = load_dir(args.pred), load_dir(args.gt)
    stems = sorted(set(pred) & set(gt))
    if not stems:
        raise ValidationError("no matching instance maps")
    aps = []
    for stem in stems:
        rep = (
            metrics.instance_ap(pred[stem], gt[stem], classes, thresholds)
            if thresholds
            else metrics.instance_ap(pred[stem], gt[stem], classes)
        )
        aps.append(rep.ap)
        print(f"{stem}: AP={rep.ap:.4f}")
    mean_ap = sum(aps) / len(aps)
    print(f"mean AP: {mean_ap:.6f}")
    if args.json:
        with open(args.json, "w") as f:
            json.dump({"images": dict(zip(stems, aps)), "mean_ap": mean_ap}, f, indent=2)
            f.write("\n")
    return 0


def cmd_eval_disagree(args) -> int:
    catalog = _load_catalog(args.catalog)
    exclude = frozenset(_parse_ints(args.exclude)) if args.exclude else frozenset()
    pairs = _paired_stems(args.a, args.b)
    fractions = []
    for stem, pa, pb in pairs:
        frac = metrics.disagreement_fraction(
            raster.read_label_map(pa, catalog), raster.read_label_map(pb, catalog), exclude
        )
        fractions.append(frac)
        print(f"{stem}: disagreement={frac:.4%}")
    print(f"mean disagreement: {sum(fractions) / len(fractions):.6f}")
    return 0


def cmd_masked_l1(args) -> int:
    catalog = _load_catalog(args.catalog)
    x = raster.read_image(args.x)
    y = raster.read_image(args.y)
    labels = raster.read_label_map(args.labels, catalog)
    value = metrics.masked_weighted_l1(x, y, labels)
    print(f"{value:.6f}")
    return 0


def cmd_stats(args) -> int:
    entries = manifest.load_manifest(args.manifest)
    root = args.root or os.path.dirname(os.path.abspath(args.manifest))
    catalog = _load_catalog(args.catalog)
    loaded = []
    for e in entries:
        if e.semantic_ref:
            labels = raster.read_label_map(os.path.join(root, e.semantic_ref), catalog)
            inst = None
            if e.instance_ref:
                png = os.path.join(root, e.instance_ref)
                table = os.path.splitext(png)[0] + ".json"
                if os.path.exists(table):
                    inst = instances.load_instance_map(png, table)
            loaded.append((labels, inst))
    report = metrics.dataset_stats(loaded)
    weather = manifest.weather_counts(entries)
    print(f"entries: {len(entries)} ({report.num_entries} with semantic masks)")
    print("weather: " + ", ".join(f"{k}={v}" for k, v in weather.items()))
    print(f"{'class':>14} {'pixels':>12} {'segments':>10} {'instances':>10}")
    for c in sorted(report.per_class_pixels):
        name = catalog.get(c).name if c < len(catalog) else str(c)
        print(
            f"{name:>14} {report.per_class_pixels[c]:>12}"
            f" {report.per_class_segments.get(c, 0):>10}"
            f" {report.instance_counts.get(c, 0):>10}"
        )
    if args.json:
        with open(args.json, "w") as f:
            json.dump(
                {
                    "entries": len(entries),
                    "weather": weather,
                    "per_class_pixels": report.per_class_pixels,
                    "per_class_segments": report.per_class_segments,
                    "instance_counts": report.instance_counts,
                },
                f,
                indent=2,
            )
            f.write("\n")
    return 0


def cmd_split(args) -> int:
    try:
        ratios = tuple(int(x) for x in args.ratios.split(":"))
    except ValueError:
        raise ValidationError(f"ratios must look like 7:1:2, got {args.ratios!r}") from None
    entries = manifest.load_manifest(args.manifest)
    entries = manifest.split_dataset(entries, ratios, seed=args.seed)
    manifest.save_manifest(entries, args.out)
    counts = {s.value: 0 for s in manifest.Split}
    for e in entries:
        counts[e.split.value] += 1
    print(", ".join(f"{k}={v}" for k, v in counts.items() if v))
    return 0


def cmd_blur(args) -> int:
    records = privacy.load_box_file(args.boxes)
    kernel = privacy.AUTO if args.kernel == "auto" else int(args.kernel)
    image_id = args.image_id or os.path.splitext(os.path.basename(args.image))[0]
    img = raster.read_image(args.image)
    boxes = privacy.boxes_for_image(records, image_id)
    raster.write_image(args.out, privacy.blur_regions(img, boxes, kernel))
    print(f"blurred {len(boxes)} box(es) -> {args.out}")
    return 0


def cmd_weights_search(args) -> int:
    catalog = _load_catalog(args.catalog)
    dirs = args.pred_dirs.split(",")
    stems = _common_stems(dirs)
    sets = [[raster.read_label_map(_png_stems(d)[s], catalog) for d in dirs] for s in stems]
    ranking = fusion.weight_search(sets, args.grid_step, args.alpha)
    top = ranking[: args.top] if args.top else ranking
    for weights, frac in top:
        print(" ".join(f"{w:.2f}" for w in weights) + f"  mean_reliable={frac:.4f}")
    if args.json:
        with open(args.json, "w") as f:
            json.dump(
                [{"weights": list(w), "mean_reliable_fraction": fr} for w, fr in ranking],
                f,
                indent=2,
            )
            f.write("\n")
    return 0


def cmd_serve(args) -> int:
    from . import service

    service.serve(args.workdir, host=args.host, port=args.port)
    return 0


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="segfuse", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.set_defaults(fn=fn)
        sp.add_argument("--catalog", help="class catalog JSON (defaults to the 19-class catalog)")
        return sp

    sp = add("fuse", cmd_fuse, "fuse per-method prediction dirs into labeled results")
    sp.add_argument("--pred-dirs", required=True, help="comma-separated prediction directories")
    sp.add_argument("--weights", help="comma-separated method weights (must sum to 1)")
    sp.add_argument("--alpha", type=float, default=0.7)
    sp.add_argument("--methods", help="comma-separated method names")
    sp.add_argument("--config", help="fusion config JSON (alternative to --weights)")
    sp.add_argument("--out", required=True)
    sp.add_argument("--jobs", type=int, default=1)

    sp = add("uncertainty", cmd_uncertainty, "write the sentinel-marked uncertainty map")
    sp.add_argument("--fused", required=True, help="per-image fused result directory")
    sp.add_argument("--out", required=True)

    sp = add("merge", cmd_merge, "apply manual edit spans and emit the finalized map")
    sp.add_argument("--fused", required=True)
    sp.add_argument("--edits", required=True, help="JSON list of edit spans")
    sp.add_argument("--out", required=True)

    sp = add("instances", cmd_instances, "split a label map into per-object instances")
    sp.add_argument("--labels", required=True)
    sp.add_argument("--classes", default="11,12,13,14,15,16,17,18")
    sp.add_argument("--edits", help="JSON list of merge/split instance edits")
    sp.add_argument("--out", required=True, help="output prefix")

    sp = add("eval-miou", cmd_eval_miou, "class-averaged IoU between two label sources")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--gt", required=True)
    sp.add_argument("--ignore", type=int, default=raster.SENTINEL)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--json")

    sp = add("eval-ap", cmd_eval_ap, "instance-mask average precision")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--gt", required=True)
    sp.add_argument("--classes", default="11,12,13,14,15,16,17,18")
    sp.add_argument("--thresholds", help="comma-separated IoU thresholds")
    sp.add_argument("--json")

    sp = add("eval-disagree", cmd_eval_disagree, "fraction of differing pixels")
    sp.add_argument("--a", required=True)
    sp.add_argument("--b", required=True)
    sp.add_argument("--exclude", help="comma-separated class ids to exclude")

    sp = add("masked-l1", cmd_masked_l1, "semantics-weighted L1 distance between images")
    sp.add_argument("--x", required=True)
    sp.add_argument("--y", required=True)
    sp.add_argument("--labels", required=True)

    sp = add("stats", cmd_stats, "dataset statistics from a manifest")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--root", help="base dir for mask refs (default: manifest dir)")
    sp.add_argument("--json")

    sp = add("split", cmd_split, "assign train/val/test splits")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--ratios", default="7:1:2")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)

    sp = add("blur", cmd_blur, "box-filter blur of face/plate regions")
    sp.add_argument("--image", required=True)
    sp.add_argument("--boxes", required=True, help="box record file")
    sp.add_argument("--kernel", default="auto", help="odd integer >= 3 or 'auto'")
    sp.add_argument("--image-id", help="box records key (default: image basename)")
    sp.add_argument("--out", required=True)

    sp = add("weights-search", cmd_weights_search, "rank weight vectors by reliable fraction")
    sp.add_argument("--pred-dirs", required=True)
    sp.add_argument("--grid-step", type=float, default=0.1)
    sp.add_argument("--alpha", type=float, default=0.7)
    sp.add_argument("--top", type=int, default=10)
    sp.add_argument("--json")

    sp = add("serve", cmd_serve, "run the annotation HTTP service")
    sp.add_argument("--workdir", required=True)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except SegfuseError as e:
        print(f"error [{e.code}]: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error [not_found]: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
