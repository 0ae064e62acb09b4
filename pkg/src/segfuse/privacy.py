"""Anonymization blur for face and license-plate regions.

Inside each box every channel value becomes the unweighted mean of its
k x k neighborhood, with out-of-box coordinates clamped to the box edge
(replication), so nothing bleeds in from outside. Sums accumulate in
wide integers and divide with round-half-up, which makes the summed-area
fast path bit-identical to a naive per-pixel mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ValidationError
from .raster import Image

AUTO = "auto"

BOX_KINDS = ("face", "plate")


@dataclass(frozen=True)
class BBox:
    row: int
    col: int
    height: int
    width: int

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValidationError(f"box must be at least 1x1, got {self.height}x{self.width}")
        if self.row < 0 or self.col < 0:
            raise ValidationError("box origin must be nonnegative")


@dataclass(frozen=True)
class BoxRecord:
    image_id: str
    box: BBox
    kind: str

    def __post_init__(self):
        if self.kind not in BOX_KINDS:
            raise ValidationError(f"box kind must be one of {BOX_KINDS}, got {self.kind!r}")


def auto_kernel(box: BBox) -> int:
    """Largest odd kernel <= max(3, min(height, width) / 4)."""
    k = int(max(3.0, min(box.height, box.width) / 4.0))
    return k if k % 2 == 1 else k - 1


def _box_mean(region: np.ndarray, k: int) -> np.ndarray:
    """Round-half-up k x k clamped mean of one uint8 channel region via a
    summed-area table on the edge-replicated region."""
    pad = k // 2
    padded = np.pad(region.astype(np.int64), pad, mode="edge")
    sat = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1), dtype=np.int64)
    sat[1:, 1:] = padded.cumsum(axis=0).cumsum(axis=1)
    h, w = region.shape
    r0 = np.arange(h)
    c0 = np.arange(w)
    # window over padded coords: rows [r0, r0 + k), cols [c0, c0 + k)
    window = (
        sat[r0[:, None] + k, c0[None, :] + k]
        - sat[r0[:, None], c0[None, :] + k]
        - sat[r0[:, None] + k, c0[None, :]]
        + sat[r0[:, None], c0[None, :]]
    )
    return ((window + k * k // 2) // (k * k)).astype(np.uint8)


def blur_regions(img: Image, boxes: list[BBox], kernel: int | str = AUTO) -> Image:
    """Blur the given boxes; pixels outside all boxes stay bit-identical.

    ``kernel`` is an odd integer >= 3 or AUTO (kernel scales with box
    size). Overlapping boxes are processed sequentially in list order.
    """
    if kernel != AUTO:
        if not isinstance(kernel, int) or kernel < 3 or kernel % 2 == 0:
            raise ValidationError(f"kernel must be an odd integer >= 3 or 'auto', got {kernel!r}")
    h, w = img.data.shape[:2]
    for b in boxes:
        if b.row + b.height > h or b.col + b.width > w:
            raise ValidationError(f"box {b} exceeds {h}x{w} image bounds")
    out = np.array(img.data)
    for b in boxes:
        k = auto_kernel(b) if kernel == AUTO else kernel
        region = out[b.row : b.row + b.height, b.col : b.col + b.width]
        for ch in range(3):
            region[:, :, ch] = _box_mean(region[:, :, ch], k)
    return Image(out)


def parse_box_file(text: str) -> list[BoxRecord]:
    """Parse box records: one per line, ``image_id row col height width kind``.

    Blank lines and lines starting with '#' are skipped. Raises
    FormatError naming the offending line number.
    """
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 6:
            raise FormatError(f"line {lineno}: expected 6 fields, got {len(parts)}")
        image_id, row, col, height, width, kind = parts
        try:
            box = BBox(int(row), int(col), int(height), int(width))
        except ValueError as e:
            raise FormatError(f"line {lineno}: {e}") from e
        except ValidationError as e:
            raise FormatError(f"line {lineno}: {e}") from e
        try:
            records.append(BoxRecord(image_id, box, kind))
        except ValidationError as e:
            raise FormatError(f"line {lineno}: {e}") from e
    return records


def load_box_file(path) -> list[BoxRecord]:
    with open(path) as f:
        return parse_box_file(f.read())


def boxes_for_image(records: list[BoxRecord], image_id: str) -> list[BBox]:
    return [r.box for r in records if r.image_id == image_id]
