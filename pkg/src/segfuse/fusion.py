"""Weighted cross-validation fusion of candidate label maps.

Each of K segmentation methods votes for one class per pixel. The
confidence score of class ``c`` at a pixel is the sum of the weights of
the methods that predicted ``c`` there; the class with the largest score
wins. Pixels whose winning score strictly exceeds the threshold ``alpha``
are reliable; the rest are flagged for manual annotation.

Scores are accumulated in method order, so the vectorized path is
bit-identical to a naive per-pixel evaluation.
"""

from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import UnresolvedPixelsError, ValidationError
from .raster import SENTINEL, BitMask, LabelMap

#: Scores within this distance of alpha count as equal to it (not reliable).
#: Guards against float accumulation drift at the threshold: a sum of weights
#: that mathematically equals alpha must not round an ulp above it.
RELIABILITY_EPS = 1e-9

_WEIGHT_SUM_TOL = 1e-9


class TiePolicy(enum.Enum):
    """How to pick a winner when several classes share the maximal score."""

    HIGHEST_WEIGHT_METHOD = "highest_weight_method"


@dataclass(frozen=True)
class FusionConfig:
    """Method names, aligned normalized weights, and the reliability threshold."""

    method_names: tuple[str, ...]
    weights: tuple[float, ...]
    alpha: float = 0.7
    tie_policy: TiePolicy = TiePolicy.HIGHEST_WEIGHT_METHOD

    def __post_init__(self):
        object.__setattr__(self, "method_names", tuple(self.method_names))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.method_names) != len(self.weights):
            raise ValidationError(
                f"{len(self.method_names)} method names but {len(self.weights)} weights"
            )
        if len(self.weights) < 2:
            raise ValidationError("fusion requires at least 2 methods")
        if any(w < 0 for w in self.weights):
            raise ValidationError("weights must be nonnegative")
        if abs(sum(self.weights) - 1.0) > _WEIGHT_SUM_TOL:
            raise ValidationError(f"weights must sum to 1, got {sum(self.weights)!r}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValidationError(f"alpha must be in (0, 1], got {self.alpha}")

    @property
    def num_methods(self) -> int:
        return len(self.weights)

    def to_json(self) -> dict:
        return {
            "methods": list(self.method_names),
            "weights": list(self.weights),
            "alpha": self.alpha,
            "tie_policy": self.tie_policy.name,
        }

    @classmethod
    def from_json(cls, data: dict) -> "FusionConfig":
        return cls(
            method_names=tuple(data["methods"]),
            weights=tuple(data["weights"]),
            alpha=data.get("alpha", 0.7),
            tie_policy=TiePolicy[data.get("tie_policy", "HIGHEST_WEIGHT_METHOD")],
        )


@dataclass(frozen=True, eq=False)
class ConfidenceGrid:
    """(height, width) grid of winning-label scores in [0, 1]."""

    scores: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.scores, dtype=np.float64, order="C")
        if arr.ndim != 2:
            raise ValidationError(f"ConfidenceGrid must be 2-D, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "scores", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.scores.shape

    def __eq__(self, other) -> bool:
        return isinstance(other, ConfidenceGrid) and np.array_equal(self.scores, other.scores)


@dataclass(frozen=True)
class FusionStats:
    reliable_fraction: float
    per_class_reliable_fraction: dict[int, float]


@dataclass(frozen=True)
class FusedResult:
    """Winning labels, per-pixel confidence, reliability partition, and stats."""

    labels: LabelMap
    confidence: ConfidenceGrid
    reliable: BitMask
    stats: FusionStats

    def __post_init__(self):
        if not (self.labels.shape == self.confidence.shape == self.reliable.shape):
            raise ValidationError("FusedResult parts must share dimensions")


@dataclass(frozen=True)
class EditOp:
    """Paint the half-open column span [col_start, col_end) of one row."""

    row: int
    col_start: int
    col_end: int
    label: int

    def __post_init__(self):
        if self.col_start >= self.col_end:
            raise ValidationError(
                f"empty span: col_start={self.col_start} >= col_end={self.col_end}"
            )
        if self.row < 0 or self.col_start < 0:
            raise ValidationError("span coordinates must be nonnegative")
        if not 0 <= self.label < SENTINEL:
            raise ValidationError(f"label {self.label} is not a paintable class id")

    def to_json(self) -> dict:
        return {
            "row": self.row,
            "col_start": self.col_start,
            "col_end": self.col_end,
            "label": self.label,
        }

    @classmethod
    def from_json(cls, d: dict) -> "EditOp":
        return cls(int(d["row"]), int(d["col_start"]), int(d["col_end"]), int(d["label"]))


def _method_priority(weights: tuple[float, ...]) -> list[int]:
    # Highest weight first; earlier method wins among equal weights.
    return sorted(range(len(weights)), key=lambda k: (-weights[k], k))


def fuse(masks: list[LabelMap], cfg: FusionConfig) -> FusedResult:
    """Fuse K candidate label maps into a winner map with confidence scores.

    Raises ValidationError on dimension mismatch, on a sentinel value in
    any input mask, or when the mask count does not match the config.
    """
    if not masks:
        raise ValidationError("mask list is empty")
    if len(masks) != cfg.num_methods:
        raise ValidationError(f"expected {cfg.num_methods} masks, got {len(masks)}")
    shape = masks[0].shape
    for i, m in enumerate(masks):
        if m.shape != shape:
            raise ValidationError(f"mask {i} has shape {m.shape}, expected {shape}")
    stacked = np.stack([m.data for m in masks])  # (K, h, w)
    if (stacked == SENTINEL).any():
        k = int(np.argwhere((stacked == SENTINEL).any(axis=(1, 2)))[0][0])
        raise ValidationError(f"input mask {k} contains sentinel pixels")

    h, w = shape
    npix = h * w
    flat = stacked.reshape(cfg.num_methods, npix)
    present = np.unique(flat)
    lut = np.zeros(256, dtype=np.intp)
    lut[present] = np.arange(len(present))

    # Accumulate per-(label, pixel) scores in method order; this matches a
    # naive per-pixel loop bit-for-bit.
    scores = np.zeros((len(present), npix), dtype=np.float64)
    cols = np.arange(npix)
    for k in range(cfg.num_methods):
        scores[lut[flat[k]], cols] += cfg.weights[k]

    smax = scores.max(axis=0)
    win_idx = scores.argmax(axis=0)

    tied = np.flatnonzero((scores == smax).sum(axis=0) > 1)
    if tied.size:
        resolved = np.zeros(tied.size, dtype=bool)
        for k in _method_priority(cfg.weights):
            cand = lut[flat[k][tied]]
            hit = ~resolved & (scores[cand, tied] == smax[tied])
            win_idx[tied[hit]] = cand[hit]
            resolved |= hit
            if resolved.all():
                break

    labels = LabelMap(present[win_idx].astype(np.uint8).reshape(h, w))
    confidence = ConfidenceGrid(smax.reshape(h, w))
    reliable_arr = confidence.scores > cfg.alpha + RELIABILITY_EPS
    reliable = BitMask(reliable_arr)

    per_class: dict[int, float] = {}
    for c in np.unique(labels.data):
        sel = labels.data == c
        per_class[int(c)] = float(np.count_nonzero(reliable_arr & sel) / np.count_nonzero(sel))
    stats = FusionStats(
        reliable_fraction=float(np.count_nonzero(reliable_arr) / npix),
        per_class_reliable_fraction=per_class,
    )
    return FusedResult(labels, confidence, reliable, stats)


def uncertainty_map(r: FusedResult) -> LabelMap:
    """Winner map with every unreliable pixel overwritten by the sentinel."""
    out = np.array(r.labels.data)
    out[~r.reliable.bits] = SENTINEL
    return LabelMap(out)


def merge_manual(r: FusedResult, edits: list[EditOp]) -> LabelMap:
    """Apply manual paint spans on top of the uncertainty map.

    Later spans overwrite earlier ones. Raises UnresolvedPixelsError if
    any sentinel pixel survives (finalization requires zero) and
    ValidationError on an out-of-bounds span.
    """
    base = np.array(uncertainty_map(r).data)
    h, w = base.shape
    for e in edits:
        if e.row >= h or e.col_end > w:
            raise ValidationError(
                f"span (row={e.row}, cols [{e.col_start}, {e.col_end})) exceeds {h}x{w} bounds"
            )
        base[e.row, e.col_start : e.col_end] = e.label
    remaining = np.argwhere(base == SENTINEL)
    if len(remaining):
        first = (int(remaining[0][0]), int(remaining[0][1]))
        raise UnresolvedPixelsError(len(remaining), first)
    return LabelMap(base)


def remaining_uncertain(r: FusedResult, edits: list[EditOp]) -> tuple[int, np.ndarray]:
    """Count sentinel pixels left after applying edits; returns (count, coords)."""
    base = np.array(uncertainty_map(r).data)
    h, w = base.shape
    for e in edits:
        if e.row >= h or e.col_end > w:
            raise ValidationError(
                f"span (row={e.row}, cols [{e.col_start}, {e.col_end})) exceeds {h}x{w} bounds"
            )
        base[e.row, e.col_start : e.col_end] = e.label
    coords = np.argwhere(base == SENTINEL)
    return len(coords), coords


def enumerate_weight_vectors(k: int, grid_step: float) -> list[tuple[float, ...]]:
    """All weight vectors on the k-simplex with components that are multiples
    of grid_step, in ascending lexicographic order."""
    if not 0 < grid_step <= 1:
        raise ValidationError(f"grid_step must be in (0, 1], got {grid_step}")
    n = round(1.0 / grid_step)
    if abs(n * grid_step - 1.0) > 1e-9:
        raise ValidationError(f"grid_step {grid_step} does not divide 1 evenly")
    out = []
    for combo in itertools.product(range(n + 1), repeat=k):
        if sum(combo) == n:
            # c / n rather than c * grid_step: yields the exact decimal a
            # user would type (0.3, not 0.30000000000000004).
            out.append(tuple(c / n for c in combo))
    return out


def weight_search(
    prediction_sets: list[list[LabelMap]],
    grid_step: float,
    alpha: float,
) -> list[tuple[tuple[float, ...], float]]:
    """Rank simplex-grid weight vectors by mean reliable fraction.

    Returns (weights, mean_reliable_fraction) pairs sorted by fraction
    descending; ties rank the lexicographically larger vector first, so
    among equally reliable candidates the ones concentrating weight on
    earlier methods come out on top.
    """
    if not prediction_sets:
        raise ValidationError("prediction_sets is empty")
    k = len(prediction_sets[0])
    for i, s in enumerate(prediction_sets):
        if len(s) != k:
            raise ValidationError(f"prediction set {i} has {len(s)} masks, expected {k}")
    names = tuple(f"method_{i + 1}" for i in range(k))
    results = []
    for weights in enumerate_weight_vectors(k, grid_step):
        cfg = FusionConfig(method_names=names, weights=weights, alpha=alpha)
        fractions = [fuse(list(s), cfg).stats.reliable_fraction for s in prediction_sets]
        results.append((weights, sum(fractions) / len(fractions)))
    results.sort(key=lambda t: (-t[1], tuple(-w for w in t[0])))
    return results


# --- persistence -----------------------------------------------------------

CONFIDENCE_SCALE = 65535


def quantize_confidence(scores: np.ndarray) -> np.ndarray:
    """Scale [0, 1] scores to 16-bit fixed point with round-half-up."""
    return np.floor(np.asarray(scores) * CONFIDENCE_SCALE + 0.5).astype(np.uint16)


def save_fused_result(r: FusedResult, out_dir, catalog=None, cfg: FusionConfig | None = None):
    """Persist labels/confidence/reliable rasters plus a stats record."""
    import os

    from . import raster

    catalog = catalog or raster.DEFAULT_CATALOG
    os.makedirs(out_dir, exist_ok=True)
    raster.write_label_map(os.path.join(out_dir, "labels.png"), r.labels, catalog)
    with open(os.path.join(out_dir, "confidence.png"), "wb") as f:
        f.write(raster.encode_id_map(quantize_confidence(r.confidence.scores)))
    raster.write_mask(os.path.join(out_dir, "reliable.png"), r.reliable)
    record = {
        "reliable_fraction": r.stats.reliable_fraction,
        "per_class_reliable_fraction": {
            str(k): v for k, v in r.stats.per_class_reliable_fraction.items()
        },
    }
    if cfg is not None:
        record["config"] = cfg.to_json()
    with open(os.path.join(out_dir, "stats.json"), "w") as f:
        json.dump(record, f, indent=2)
        f.write("\n")


def load_fused_result(src_dir, catalog=None) -> FusedResult:
    """Reload a persisted result. The stored reliability mask is authoritative;
    confidence is the 16-bit fixed-point approximation."""
    import os

    from . import raster

    catalog = catalog or raster.DEFAULT_CATALOG
    labels = raster.read_label_map(os.path.join(src_dir, "labels.png"), catalog)
    with open(os.path.join(src_dir, "confidence.png"), "rb") as f:
        q = raster.decode_id_map(f.read())
    reliable = raster.read_mask(os.path.join(src_dir, "reliable.png"))
    with open(os.path.join(src_dir, "stats.json")) as f:
        record = json.load(f)
    stats = FusionStats(
        reliable_fraction=record["reliable_fraction"],
        per_class_reliable_fraction={
            int(k): v for k, v in record["per_class_reliable_fraction"].items()
        },
    )
    return FusedResult(labels, ConfidenceGrid(q / CONFIDENCE_SCALE), reliable, stats)
