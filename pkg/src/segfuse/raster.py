"""Pixel-grid data types and lossless PNG encode/decode.

All rasters are row-major with the origin at the top-left; coordinates
are (row, col). Arrays are frozen after construction so values can be
shared freely between concurrent workers.

On-disk conventions:

* label maps: single-channel 8-bit paletted PNG where the pixel value IS
  the class id and the palette carries the display colors,
* images: 8-bit RGB PNG,
* boolean masks: 8-bit single-channel PNG with 0 = false, 255 = true.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from .errors import FormatError, ValidationError

#: Reserved 8-bit value meaning "unlabeled / uncertain"; never a class id.
SENTINEL = 255


@dataclass(frozen=True)
class ClassDef:
    """One semantic class: contiguous id, name, display color, importance weight."""

    id: int
    name: str
    color: tuple[int, int, int]
    importance: float = 1.0


@dataclass(frozen=True)
class ClassCatalog:
    """Ordered catalog of semantic classes with ids contiguous from 0."""

    classes: tuple[ClassDef, ...]

    def __post_init__(self):
        ids = [c.id for c in self.classes]
        if ids != list(range(len(ids))):
            raise ValidationError(f"class ids must be contiguous from 0, got {ids}")
        if SENTINEL in ids:
            raise ValidationError(f"{SENTINEL} is reserved and cannot be a class id")
        for c in self.classes:
            if c.importance < 0:
                raise ValidationError(f"class {c.name!r} has negative importance")

    def __len__(self) -> int:
        return len(self.classes)

    def __iter__(self):
        return iter(self.classes)

    def get(self, class_id: int) -> ClassDef:
        if not 0 <= class_id < len(self.classes):
            raise ValidationError(f"class id {class_id} not in catalog")
        return self.classes[class_id]

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(c.id for c in self.classes)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.classes)

    def valid_values(self) -> np.ndarray:
        """Boolean lookup table over 0..255: True where the value is legal in a label map."""
        ok = np.zeros(256, dtype=bool)
        ok[: len(self.classes)] = True
        ok[SENTINEL] = True
        return ok

    def palette(self) -> list[int]:
        """Flat 768-entry RGB palette; the sentinel renders white."""
        pal = [0, 0, 0] * 256
        for c in self.classes:
            pal[3 * c.id : 3 * c.id + 3] = list(c.color)
        pal[3 * SENTINEL : 3 * SENTINEL + 3] = [255, 255, 255]
        return pal

    def to_json(self) -> list[dict]:
        return [
            {"id": c.id, "name": c.name, "color": list(c.color), "importance": c.importance}
            for c in self.classes
        ]

    @classmethod
    def from_json(cls, data: list[dict]) -> "ClassCatalog":
        return cls(
            tuple(
                ClassDef(d["id"], d["name"], tuple(d["color"]), d.get("importance", 1.0))
                for d in data
            )
        )


def _frozen_array(data, dtype, ndim, what: str, channels: int | None = None) -> np.ndarray:
    arr = np.array(data, dtype=dtype, order="C")
    if arr.ndim != ndim:
        raise ValidationError(f"{what} must be {ndim}-D, got shape {arr.shape}")
    if channels is not None and arr.shape[-1] != channels:
        raise ValidationError(f"{what} must have {channels} channels, got shape {arr.shape}")
    if arr.size == 0:
        raise ValidationError(f"{what} must be non-empty")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Dense (height, width) grid of 8-bit class ids; 255 means unlabeled."""

    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen_array(self.data, np.uint8, 2, "LabelMap"))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelMap) and np.array_equal(self.data, other.data)

    def __hash__(self):
        return hash((self.shape, self.data.tobytes()))

    def validate(self, catalog: ClassCatalog) -> None:
        """Raise if any pixel holds a value outside the catalog (sentinel allowed)."""
        bad = ~catalog.valid_values()[self.data]
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise ValidationError(
                f"value {self.data[r, c]} at pixel (row={r}, col={c}) is not a catalog id"
            )


@dataclass(frozen=True, eq=False)
class Image:
    """(height, width, 3) grid of 8-bit RGB values."""

    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(
            self, "data", _frozen_array(self.data, np.uint8, 3, "Image", channels=3)
        )

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def __eq__(self, other) -> bool:
        return isinstance(other, Image) and np.array_equal(self.data, other.data)


@dataclass(frozen=True, eq=False)
class BitMask:
    """(height, width) boolean grid."""

    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "bits", _frozen_array(self.bits, bool, 2, "BitMask"))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    def __eq__(self, other) -> bool:
        return isinstance(other, BitMask) and np.array_equal(self.bits, other.bits)


# The 19-class street-scene catalog following the Cityscapes naming convention
# and its standard display palette.
CITYSCAPES_19 = ClassCatalog(
    tuple(
        ClassDef(i, name, color)
        for i, (name, color) in enumerate(
            [
                ("road", (128, 64, 128)),
                ("sidewalk", (244, 35, 232)),
                ("building", (70, 70, 70)),
                ("wall", (102, 102, 156)),
                ("fence", (190, 153, 153)),
                ("pole", (153, 153, 153)),
                ("traffic light", (250, 170, 30)),
                ("traffic sign", (220, 220, 0)),
                ("vegetation", (107, 142, 35)),
                ("terrain", (152, 251, 152)),
                ("sky", (70, 130, 180)),
                ("person", (220, 20, 60)),
                ("rider", (255, 0, 0)),
                ("car", (0, 0, 142)),
                ("truck", (0, 0, 70)),
                ("bus", (0, 60, 100)),
                ("train", (0, 80, 100)),
                ("motorcycle", (0, 0, 230)),
                ("bicycle", (119, 11, 32)),
            ]
        )
    )
)

DEFAULT_CATALOG = CITYSCAPES_19

#: Classes split into per-object instances by default: person/rider plus the
#: vehicle family (ids 11..18 in the 19-class catalog).
DEFAULT_INSTANCE_CLASSES = frozenset(range(11, 19))


def _open_png(b: bytes, what: str) -> PILImage.Image:
    try:
        img = PILImage.open(io.BytesIO(b))
        img.load()
        return img
    except (UnidentifiedImageError, OSError, SyntaxError) as e:
        raise FormatError(f"not a well-formed {what} PNG: {e}") from e


def encode_label_map(m: LabelMap, catalog: ClassCatalog = DEFAULT_CATALOG) -> bytes:
    """Encode a label map as a paletted PNG; pixel value == class id."""
    img = PILImage.fromarray(np.asarray(m.data), mode="P")
    img.putpalette(catalog.palette())
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def decode_label_map(b: bytes, catalog: ClassCatalog = DEFAULT_CATALOG) -> LabelMap:
    """Decode and validate a label-map PNG.

    Raises FormatError on a malformed stream and ValidationError (naming
    the offending pixel) when a value is outside the catalog.
    """
    img = _open_png(b, "label map")
    if img.mode not in ("P", "L"):
        raise FormatError(f"label map PNG must be single-channel 8-bit, got mode {img.mode!r}")
    m = LabelMap(np.asarray(img, dtype=np.uint8))
    m.validate(catalog)
    return m


def encode_image(img: Image) -> bytes:
    buf = io.BytesIO()
    PILImage.fromarray(np.asarray(img.data), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_image(b: bytes) -> Image:
    img = _open_png(b, "RGB image")
    if img.mode != "RGB":
        raise FormatError(f"image PNG must be RGB, got mode {img.mode!r}")
    return Image(np.asarray(img, dtype=np.uint8))


def encode_mask(mask: BitMask) -> bytes:
    buf = io.BytesIO()
    arr = np.where(np.asarray(mask.bits), 255, 0).astype(np.uint8)
    PILImage.fromarray(arr, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def decode_mask(b: bytes) -> BitMask:
    img = _open_png(b, "bit mask")
    if img.mode != "L":
        raise FormatError(f"mask PNG must be 8-bit grayscale, got mode {img.mode!r}")
    arr = np.asarray(img, dtype=np.uint8)
    bad = (arr != 0) & (arr != 255)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise ValidationError(f"mask value {arr[r, c]} at (row={r}, col={c}) is neither 0 nor 255")
    return BitMask(arr == 255)


def encode_id_map(ids: np.ndarray) -> bytes:
    """Encode a (h, w) nonnegative integer grid as 16-bit grayscale PNG."""
    arr = np.asarray(ids)
    if arr.min() < 0 or arr.max() > 65535:
        raise ValidationError("id map values must fit in uint16")
    buf = io.BytesIO()
    PILImage.fromarray(arr.astype(np.uint16)).save(buf, format="PNG")
    return buf.getvalue()


def decode_id_map(b: bytes) -> np.ndarray:
    img = _open_png(b, "id map")
    if img.mode not in ("I", "I;16"):
        raise FormatError(f"id map PNG must be 16-bit grayscale, got mode {img.mode!r}")
    return np.asarray(img, dtype=np.int64).astype(np.int32)


def read_label_map(path, catalog: ClassCatalog = DEFAULT_CATALOG) -> LabelMap:
    with open(path, "rb") as f:
        return decode_label_map(f.read(), catalog)


def write_label_map(path, m: LabelMap, catalog: ClassCatalog = DEFAULT_CATALOG) -> None:
    with open(path, "wb") as f:
        f.write(encode_label_map(m, catalog))


def read_image(path) -> Image:
    with open(path, "rb") as f:
        return decode_image(f.read())


def write_image(path, img: Image) -> None:
    with open(path, "wb") as f:
        f.write(encode_image(img))


def read_mask(path) -> BitMask:
    with open(path, "rb") as f:
        return decode_mask(f.read())


def write_mask(path, mask: BitMask) -> None:
    with open(path, "wb") as f:
        f.write(encode_mask(mask))
