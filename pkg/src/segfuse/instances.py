"""Instance extraction from semantic label maps.

Every maximal 8-connected component of same-class pixels (for classes
designated as instance classes) becomes one instance. Ids are assigned
1, 2, 3, ... by the scanline position of each component's first pixel,
so repeated runs are bit-identical.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np

from .errors import ValidationError
from .raster import DEFAULT_INSTANCE_CLASSES, LabelMap, decode_id_map, encode_id_map

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True, eq=False)
class InstanceMap:
    """Per-pixel instance ids (0 = no instance) plus an id -> class table."""

    ids: np.ndarray = field(repr=False)
    table: dict[int, int]

    def __post_init__(self):
        arr = np.array(self.ids, dtype=np.int32, order="C")
        if arr.ndim != 2:
            raise ValidationError(f"InstanceMap ids must be 2-D, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "ids", arr)
        table = {int(k): int(v) for k, v in self.table.items()}
        present = set(np.unique(arr).tolist()) - {0}
        missing = present - set(table)
        if missing:
            raise ValidationError(f"ids {sorted(missing)} missing from instance table")
        object.__setattr__(self, "table", MappingProxyType(table))

    @property
    def height(self) -> int:
        return self.ids.shape[0]

    @property
    def width(self) -> int:
        return self.ids.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.ids.shape

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, InstanceMap)
            and np.array_equal(self.ids, other.ids)
            and dict(self.table) == dict(other.table)
        )

    def instance_count(self) -> int:
        return len(self.table)

    def class_instance_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for cls in self.table.values():
            counts[cls] = counts.get(cls, 0) + 1
        return counts


@dataclass(frozen=True)
class MergeEdit:
    """Union the listed instances under the smallest participating id."""

    ids: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "ids", frozenset(int(i) for i in self.ids))
        if len(self.ids) < 2:
            raise ValidationError("merge needs at least two instance ids")


@dataclass(frozen=True)
class SplitEdit:
    """Cut one instance apart along the given separator pixels."""

    target: int
    separator: frozenset[tuple[int, int]]

    def __post_init__(self):
        object.__setattr__(
            self, "separator", frozenset((int(r), int(c)) for r, c in self.separator)
        )


InstanceEdit = MergeEdit | SplitEdit


def instance_edit_from_json(d: dict) -> InstanceEdit:
    kind = d.get("kind")
    if kind == "merge":
        return MergeEdit(frozenset(d["ids"]))
    if kind == "split":
        return SplitEdit(int(d["id"]), frozenset((r, c) for r, c in d["separator"]))
    raise ValidationError(f"unknown instance edit kind {kind!r}")


def instance_edit_to_json(e: InstanceEdit) -> dict:
    if isinstance(e, MergeEdit):
        return {"kind": "merge", "ids": sorted(e.ids)}
    return {"kind": "split", "id": e.target, "separator": sorted(e.separator)}


def _scanline_components(binary: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """8-connected components of a boolean grid.

    Returns (component indices, first flat index of each component), with
    components numbered 1.. by scanline order of their first pixel.
    """
    from scipy import ndimage  # deferred: keeps CLI startup fast

    raw, n = ndimage.label(binary, structure=_EIGHT_CONNECTED)
    if n == 0:
        return raw, []
    flat = raw.ravel()
    nz = np.flatnonzero(flat)
    # first occurrence of each raw label in scanline order
    first = np.full(n + 1, flat.size, dtype=np.int64)
    # reversed so earlier positions overwrite later ones
    first[flat[nz[::-1]]] = nz[::-1]
    order = np.argsort(first[1:], kind="stable")  # raw label -> rank
    remap = np.zeros(n + 1, dtype=np.int64)
    remap[order + 1] = np.arange(1, n + 1)
    return remap[raw], sorted(first[1:].tolist())


def split_instances(
    labels: LabelMap,
    instance_classes: frozenset[int] | set[int] = DEFAULT_INSTANCE_CLASSES,
) -> InstanceMap:
    """Assign a distinct id to every detached same-class segment of the
    designated classes; all other pixels get id 0."""
    data = labels.data
    per_class: dict[int, np.ndarray] = {}
    entries: list[tuple[int, int, int]] = []  # (first flat pixel, class, local index)
    for cls in sorted(instance_classes):
        comp, firsts = _scanline_components(data == cls)
        if firsts:
            per_class[cls] = comp
            for i, f in enumerate(firsts, start=1):
                entries.append((f, cls, i))
    entries.sort()
    table: dict[int, int] = {}
    remaps = {
        cls: np.zeros(int(comp.max()) + 1, dtype=np.int32) for cls, comp in per_class.items()
    }
    for new_id, (_, cls, local) in enumerate(entries, start=1):
        remaps[cls][local] = new_id
        table[new_id] = cls
    ids = np.zeros(data.shape, dtype=np.int32)
    for cls, comp in per_class.items():
        nz = comp > 0
        ids[nz] = remaps[cls][comp[nz]]
    return InstanceMap(ids, table)


def _nearest_first_pixel(coord: tuple[int, int], reps: list[tuple[int, tuple[int, int]]]) -> int:
    """Id of the component whose first scanline pixel is nearest (ties -> smaller id)."""
    best_id, best_d = None, None
    for inst_id, (r, c) in reps:
        d = (coord[0] - r) ** 2 + (coord[1] - c) ** 2
        if best_d is None or d < best_d or (d == best_d and inst_id < best_id):
            best_id, best_d = inst_id, d
    return best_id


def apply_instance_edits(m: InstanceMap, edits: list[InstanceEdit]) -> InstanceMap:
    """Apply manual merge/split corrections in order.

    Merging is restricted to instances of one class so the per-class pixel
    counts of the underlying semantic map are preserved. A split that does
    not disconnect its target is a no-op with a warning.
    """
    ids = np.array(m.ids)
    table = dict(m.table)
    for e in edits:
        if isinstance(e, MergeEdit):
            unknown = e.ids - table.keys()
            if unknown:
                raise ValidationError(f"merge references unknown ids {sorted(unknown)}")
            classes = {table[i] for i in e.ids}
            if len(classes) > 1:
                raise ValidationError(
                    f"cannot merge instances of different classes {sorted(classes)}"
                )
            keep = min(e.ids)
            ids[np.isin(ids, list(e.ids - {keep}))] = keep
            for i in e.ids - {keep}:
                del table[i]
        elif isinstance(e, SplitEdit):
            if e.target not in table:
                raise ValidationError(f"split references unknown id {e.target}")
            target_mask = ids == e.target
            sep = [p for p in sorted(e.separator) if target_mask[p]]
            outside = e.separator - set(sep)
            if outside:
                raise ValidationError(
                    f"separator pixels {sorted(outside)} lie outside instance {e.target}"
                )
            cut = np.array(target_mask)
            for p in sep:
                cut[p] = False
            comp, firsts = _scanline_components(cut)
            if len(firsts) <= 1:
                warnings.warn(
                    f"split of instance {e.target} did not disconnect it; no-op",
                    stacklevel=2,
                )
                continue
            next_id = max(table) + 1  # fresh: beyond every id incl. the target
            cls = table.pop(e.target)
            w = ids.shape[1]
            reps = []
            for i, f in enumerate(firsts, start=1):
                inst_id = next_id + i - 1
                ids[comp == i] = inst_id
                table[inst_id] = cls
                reps.append((inst_id, (f // w, f % w)))
            for p in sep:
                ids[p] = _nearest_first_pixel(p, reps)
        else:
            raise ValidationError(f"unknown edit type {type(e).__name__}")
    return InstanceMap(ids, table)


# --- persistence -----------------------------------------------------------


def instance_table_json(m: InstanceMap) -> dict:
    """id -> {class, pixel_count, bbox [row0, col0, row1, col1] inclusive}."""
    out = {}
    for inst_id in sorted(m.table):
        mask = m.ids == inst_id
        coords = np.argwhere(mask)
        r0, c0 = coords.min(axis=0)
        r1, c1 = coords.max(axis=0)
        out[str(inst_id)] = {
            "class": m.table[inst_id],
            "pixel_count": int(mask.sum()),
            "bbox": [int(r0), int(c0), int(r1), int(c1)],
        }
    return out


def save_instance_map(m: InstanceMap, ids_path, table_path) -> None:
    with open(ids_path, "wb") as f:
        f.write(encode_id_map(m.ids))
    with open(table_path, "w") as f:
        json.dump(instance_table_json(m), f, indent=2)
        f.write("\n")


def load_instance_map(ids_path, table_path) -> InstanceMap:
    with open(ids_path, "rb") as f:
        ids = decode_id_map(f.read())
    with open(table_path) as f:
        raw = json.load(f)
    return InstanceMap(ids, {int(k): v["class"] for k, v in raw.items()})
