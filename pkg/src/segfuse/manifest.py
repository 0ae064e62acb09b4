"""Dataset manifest: one line-delimited JSON record per image, with weather
tags, split assignment, mask references, and workflow status.

Records loaded from disk keep their raw line; saving an unmodified entry
writes that line back byte-for-byte, so filtering is diff-friendly.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import random
from dataclasses import dataclass, field

from .errors import FormatError, ValidationError

WEATHER_TAGS = frozenset({"rainy", "droplet", "fog", "night", "sunny"})


class Split(enum.Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"
    UNASSIGNED = "unassigned"


class Status(enum.Enum):
    RAW = "raw"
    FUSED = "fused"
    ANNOTATING = "annotating"
    FINALIZED = "finalized"


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    image_ref: str
    weather: frozenset[str] = frozenset()
    split: Split = Split.UNASSIGNED
    semantic_ref: str | None = None
    instance_ref: str | None = None
    status: Status = Status.RAW
    extras: dict = field(default_factory=dict)
    raw_line: str | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "weather", frozenset(self.weather))
        bad = self.weather - WEATHER_TAGS
        if bad:
            raise ValidationError(f"unknown weather tag(s) {sorted(bad)}")
        if self.status is Status.FINALIZED and not self.semantic_ref:
            raise ValidationError(
                f"entry {self.image_id!r}: FINALIZED requires a semantic mask reference"
            )

    def to_json(self) -> dict:
        d = {
            "image_id": self.image_id,
            "image": self.image_ref,
            "weather": sorted(self.weather),
            "split": self.split.value,
            "semantic": self.semantic_ref,
            "instance": self.instance_ref,
            "status": self.status.value,
        }
        d.update(self.extras)
        return d

    @classmethod
    def from_json(cls, d: dict, raw_line: str | None = None) -> "ManifestEntry":
        known = {"image_id", "image", "weather", "split", "semantic", "instance", "status"}
        if "image_id" not in d:
            raise ValidationError("record is missing image_id")
        if "image" not in d:
            raise ValidationError("record is missing image")
        try:
            split = Split(d.get("split", "unassigned"))
        except ValueError:
            raise ValidationError(f"unknown split {d.get('split')!r}") from None
        try:
            status = Status(d.get("status", "raw"))
        except ValueError:
            raise ValidationError(f"unknown status {d.get('status')!r}") from None
        return cls(
            image_id=d["image_id"],
            image_ref=d["image"],
            weather=frozenset(d.get("weather", [])),
            split=split,
            semantic_ref=d.get("semantic"),
            instance_ref=d.get("instance"),
            status=status,
            extras={k: v for k, v in d.items() if k not in known},
            raw_line=raw_line,
        )


def entry_replace(entry: ManifestEntry, **changes) -> ManifestEntry:
    """dataclasses.replace that also drops the stale raw line."""
    changes.setdefault("raw_line", None)
    return dataclasses.replace(entry, **changes)


def parse_manifest(text: str) -> list[ManifestEntry]:
    entries = []
    seen: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as e:
            raise FormatError(f"line {lineno}: not valid JSON: {e}") from e
        if not isinstance(d, dict):
            raise FormatError(f"line {lineno}: record must be a JSON object")
        try:
            entry = ManifestEntry.from_json(d, raw_line=line)
        except ValidationError as e:
            raise FormatError(f"line {lineno}: {e}") from e
        if entry.image_id in seen:
            raise FormatError(
                f"line {lineno}: duplicate image_id {entry.image_id!r}"
                f" (first seen on line {seen[entry.image_id]})"
            )
        seen[entry.image_id] = lineno
        entries.append(entry)
    return entries


def load_manifest(path) -> list[ManifestEntry]:
    with open(path, encoding="utf-8") as f:
        return parse_manifest(f.read())


def dump_manifest(entries: list[ManifestEntry]) -> str:
    lines = []
    for e in entries:
        if e.raw_line is not None:
            try:
                if ManifestEntry.from_json(json.loads(e.raw_line)) == e:
                    lines.append(e.raw_line)
                    continue
            except (json.JSONDecodeError, ValidationError):
                pass
        lines.append(json.dumps(e.to_json()))
    return "\n".join(lines) + ("\n" if lines else "")


def save_manifest(entries: list[ManifestEntry], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(dump_manifest(entries))


def split_dataset(
    entries: list[ManifestEntry],
    ratios: tuple[int, int, int] = (7, 1, 2),
    seed: int = 0,
) -> list[ManifestEntry]:
    """Assign train/val/test splits by a seeded shuffle.

    Counts are floor(n * r / sum(r)) per part; leftover entries go to
    TRAIN first, then VAL. The returned list preserves input order.
    """
    if not entries:
        raise ValidationError("cannot split an empty manifest")
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValidationError(f"ratios must be three positive integers, got {ratios}")
    n = len(entries)
    total = sum(ratios)
    counts = [n * r // total for r in ratios]
    for i in range(n - sum(counts)):
        counts[i % 3] += 1
    order = list(range(n))
    random.Random(seed).shuffle(order)
    assignment: dict[int, Split] = {}
    pos = 0
    for split, count in zip((Split.TRAIN, Split.VAL, Split.TEST), counts):
        for idx in order[pos : pos + count]:
            assignment[idx] = split
        pos += count
    return [entry_replace(e, split=assignment[i]) for i, e in enumerate(entries)]


def filter_entries(
    entries: list[ManifestEntry],
    predicate=None,
    *,
    weather: set[str] | None = None,
    split: Split | None = None,
    status: Status | None = None,
) -> list[ManifestEntry]:
    """Order-preserving subset. ``weather`` requires all given tags;
    ``split``/``status`` match exactly; ``predicate`` is a free-form test."""
    out = []
    for e in entries:
        if weather is not None and not set(weather) <= e.weather:
            continue
        if split is not None and e.split is not split:
            continue
        if status is not None and e.status is not status:
            continue
        if predicate is not None and not predicate(e):
            continue
        out.append(e)
    return out


def weather_counts(entries: list[ManifestEntry]) -> dict[str, int]:
    counts = {tag: 0 for tag in sorted(WEATHER_TAGS)}
    for e in entries:
        for tag in e.weather:
            counts[tag] += 1
    return counts
