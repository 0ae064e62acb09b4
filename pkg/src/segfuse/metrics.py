"""Evaluation metrics: class-averaged mIoU, inter-map disagreement,
instance-mask average precision, dataset statistics, and a semantics-aware
masked weighted L1 distance between images."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .instances import InstanceMap, _scanline_components
from .raster import SENTINEL, ClassCatalog, ClassDef, Image, LabelMap

#: Mask-IoU thresholds used for average precision: 0.50, 0.55, ..., 0.95.
DEFAULT_AP_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))


@dataclass(frozen=True)
class ClassIoU:
    intersection: int
    union: int

    @property
    def iou(self) -> float | None:
        return self.intersection / self.union if self.union > 0 else None


@dataclass(frozen=True)
class IoUReport:
    """Per-class intersection/union counts and the mean over classes with
    nonzero union."""

    per_class: dict[int, ClassIoU]
    mean_iou: float


def _require_same_shape(a, b, what: str):
    if a.shape != b.shape:
        raise ValidationError(f"{what}: shape {a.shape} vs {b.shape}")


def miou(pred: LabelMap, gt: LabelMap, ignore: int = SENTINEL) -> IoUReport:
    """Class-averaged intersection-over-union.

    Pixels whose ground-truth value equals ``ignore`` are excluded from
    all counts; classes absent from both maps do not enter the mean.
    """
    _require_same_shape(pred, gt, "miou")
    keep = gt.data != ignore
    p = pred.data[keep].astype(np.int64)
    g = gt.data[keep].astype(np.int64)
    per_class: dict[int, ClassIoU] = {}
    ious = []
    for c in np.union1d(np.unique(p), np.unique(g)).tolist():
        if c == ignore:
            continue  # stray sentinel predictions count against other unions only
        inter = int(np.count_nonzero((p == c) & (g == c)))
        union = int(np.count_nonzero((p == c) | (g == c)))
        per_class[int(c)] = ClassIoU(inter, union)
        if union > 0:
            ious.append(inter / union)
    return IoUReport(per_class, mean_iou=float(np.mean(ious)) if ious else 0.0)


def merge_iou_reports(reports: list[IoUReport]) -> IoUReport:
    """Aggregate per-class counts across images, then average."""
    totals: dict[int, list[int]] = {}
    for r in reports:
        for c, ciou in r.per_class.items():
            t = totals.setdefault(c, [0, 0])
            t[0] += ciou.intersection
            t[1] += ciou.union
    per_class = {c: ClassIoU(i, u) for c, (i, u) in sorted(totals.items())}
    ious = [v.iou for v in per_class.values() if v.union > 0]
    return IoUReport(per_class, mean_iou=float(np.mean(ious)) if ious else 0.0)


def disagreement_fraction(
    a: LabelMap, b: LabelMap, exclude: frozenset[int] | set[int] = frozenset()
) -> float:
    """Fraction of differing pixels, over pixels where neither map carries
    an excluded class. Returns 0.0 when no pixel survives the exclusion."""
    _require_same_shape(a, b, "disagreement_fraction")
    keep = np.ones(a.shape, dtype=bool)
    for c in exclude:
        keep &= (a.data != c) & (b.data != c)
    total = int(np.count_nonzero(keep))
    if total == 0:
        return 0.0
    return float(np.count_nonzero((a.data != b.data) & keep) / total)


@dataclass(frozen=True)
class MatchedPair:
    class_id: int
    pred_id: int
    gt_id: int
    iou: float


@dataclass(frozen=True)
class APReport:
    per_threshold: dict[float, float]
    ap: float
    matched_pairs: list[MatchedPair]


def _instance_sizes(m: InstanceMap) -> dict[int, int]:
    ids, counts = np.unique(m.ids, return_counts=True)
    return {int(i): int(c) for i, c in zip(ids, counts) if i != 0}


def _pair_intersections(pred: InstanceMap, gt: InstanceMap) -> dict[tuple[int, int], int]:
    both = (pred.ids != 0) & (gt.ids != 0)
    codes = pred.ids[both].astype(np.int64) << 32 | gt.ids[both].astype(np.int64)
    vals, counts = np.unique(codes, return_counts=True)
    return {(int(v >> 32), int(v & 0xFFFFFFFF)): int(n) for v, n in zip(vals, counts)}


def instance_ap(
    pred: InstanceMap,
    gt: InstanceMap,
    classes: frozenset[int] | set[int],
    thresholds: tuple[float, ...] = DEFAULT_AP_THRESHOLDS,
) -> APReport:
    """Average precision of instance masks with greedy IoU matching.

    Predicted instances are matched one-to-one to ground-truth instances
    of the same class in descending mask-IoU order. At threshold t the
    score for a class is TP / (TP + FP + FN) counting matched pairs with
    IoU >= t as true positives; per-threshold values average over classes
    present in the ground truth, and ap averages those over thresholds.
    Returns ap 0.0 when no requested class has a ground-truth instance.
    """
    _require_same_shape(pred.ids, gt.ids, "instance_ap")
    for t in thresholds:
        if not 0.0 < t <= 1.0:
            raise ValidationError(f"thresholds must lie in (0, 1], got {t}")
    pred_sizes = _instance_sizes(pred)
    gt_sizes = _instance_sizes(gt)
    inter = _pair_intersections(pred, gt)

    gt_classes = sorted({c for c in gt.table.values() if c in classes})
    matched: list[MatchedPair] = []
    per_class_counts: dict[int, tuple[int, int, list[float]]] = {}
    for c in gt_classes:
        pred_ids = {i for i, cls in pred.table.items() if cls == c}
        gt_ids = {i for i, cls in gt.table.items() if cls == c}
        cand = []
        for (p, g), n in inter.items():
            if p in pred_ids and g in gt_ids:
                iou = n / (pred_sizes[p] + gt_sizes[g] - n)
                cand.append((iou, p, g))
        cand.sort(key=lambda e: (-e[0], e[1], e[2]))
        used_p: set[int] = set()
        used_g: set[int] = set()
        ious: list[float] = []
        for iou, p, g in cand:
            if p in used_p or g in used_g:
                continue
            used_p.add(p)
            used_g.add(g)
            ious.append(iou)
            matched.append(MatchedPair(c, p, g, iou))
        per_class_counts[c] = (len(pred_ids), len(gt_ids), ious)

    per_threshold: dict[float, float] = {}
    for t in thresholds:
        scores = []
        for c in gt_classes:
            n_pred, n_gt, ious = per_class_counts[c]
            tp = sum(1 for i in ious if i >= t)
            scores.append(tp / (n_pred + n_gt - tp))
        per_threshold[t] = float(np.mean(scores)) if scores else 0.0
    ap = float(np.mean(list(per_threshold.values()))) if per_threshold else 0.0
    return APReport(per_threshold, ap, matched)


@dataclass(frozen=True)
class MaskedDistanceConfig:
    """Reduced taxonomy with importance weights, plus the projection from
    the full class catalog onto it."""

    taxonomy: ClassCatalog
    projection: dict[int, int]

    def __post_init__(self):
        m = len(self.taxonomy)
        for src, dst in self.projection.items():
            if not 0 <= dst < m:
                raise ValidationError(f"projection maps {src} to out-of-taxonomy label {dst}")


# Seven-label translation taxonomy with importance weights 2, 3, 1, 0.2, 1, 2, 1.
TRANSLATION_TAXONOMY = ClassCatalog(
    (
        ClassDef(0, "road", (128, 64, 128), 2.0),
        ClassDef(1, "traffic lights", (250, 170, 30), 3.0),
        ClassDef(2, "vegetation", (107, 142, 35), 1.0),
        ClassDef(3, "sky", (70, 130, 180), 0.2),
        ClassDef(4, "people", (220, 20, 60), 1.0),
        ClassDef(5, "vehicles", (0, 0, 142), 2.0),
        ClassDef(6, "other", (70, 70, 70), 1.0),
    )
)

# Non-normative default projection from the 19-class street-scene catalog
# onto the 7-label taxonomy.
DEFAULT_PROJECTION = {
    0: 0,  # road
    1: 6,  # sidewalk -> other
    2: 6,  # building -> other
    3: 6,  # wall -> other
    4: 6,  # fence -> other
    5: 6,  # pole -> other
    6: 1,  # traffic light
    7: 6,  # traffic sign -> other
    8: 2,  # vegetation
    9: 2,  # terrain -> vegetation
    10: 3,  # sky
    11: 4,  # person
    12: 4,  # rider -> people
    13: 5,  # car
    14: 5,  # truck
    15: 5,  # bus
    16: 5,  # train
    17: 5,  # motorcycle
    18: 5,  # bicycle
}

DEFAULT_MASKED_CONFIG = MaskedDistanceConfig(TRANSLATION_TAXONOMY, DEFAULT_PROJECTION)


def masked_weighted_l1(
    x: Image,
    y: Image,
    labels: LabelMap,
    cfg: MaskedDistanceConfig = DEFAULT_MASKED_CONFIG,
) -> float:
    """Per-label L1 distance between two images, importance-weighted and
    normalized by label pixel count.

    For each taxonomy label i with p_i > 0 pixels, the contribution is
    (importance_i / p_i) * sum of |x - y| over that label's pixels and all
    three channels; labels with no pixels contribute 0. Pixels left
    unlabeled (sentinel) belong to no mask and are skipped.
    """
    _require_same_shape(x.data[..., 0], y.data[..., 0], "masked_weighted_l1")
    _require_same_shape(x.data[..., 0], labels.data, "masked_weighted_l1")
    m = len(cfg.taxonomy)
    proj = np.full(256, -1, dtype=np.int64)
    for src, dst in cfg.projection.items():
        proj[src] = dst
    lab = proj[labels.data]
    valid = lab >= 0
    absdiff = np.abs(x.data.astype(np.int64) - y.data.astype(np.int64)).sum(axis=2)
    counts = np.bincount(lab[valid], minlength=m)
    sums = np.bincount(lab[valid], weights=absdiff[valid], minlength=m)
    total = 0.0
    for i in range(m):
        if counts[i] > 0:
            total += cfg.taxonomy.get(i).importance / counts[i] * sums[i]
    return float(total)


@dataclass(frozen=True)
class StatsReport:
    """Aggregate dataset statistics: per-class pixel and segment counts,
    plus instance counts where instance maps are available."""

    num_entries: int
    per_class_pixels: dict[int, int]
    per_class_segments: dict[int, int]
    instance_counts: dict[int, int]


def dataset_stats(entries: list[tuple[LabelMap, InstanceMap | None]]) -> StatsReport:
    """Count pixels and detached 8-connected segments per class across all
    entries; instance counts come from the provided instance tables."""
    pixels: dict[int, int] = {}
    segments: dict[int, int] = {}
    instances: dict[int, int] = {}
    for labels, inst in entries:
        vals, counts = np.unique(labels.data, return_counts=True)
        for v, n in zip(vals.tolist(), counts.tolist()):
            if v == SENTINEL:
                continue
            pixels[v] = pixels.get(v, 0) + n
            _, firsts = _scanline_components(labels.data == v)
            segments[v] = segments.get(v, 0) + len(firsts)
        if inst is not None:
            for cls, n in inst.class_instance_counts().items():
                instances[cls] = instances.get(cls, 0) + n
    return StatsReport(
        num_entries=len(entries),
        per_class_pixels=dict(sorted(pixels.items())),
        per_class_segments=dict(sorted(segments.items())),
        instance_counts=dict(sorted(instances.items())),
    )
