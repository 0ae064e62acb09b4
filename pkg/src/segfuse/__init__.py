"""segfuse: semi-automatic segmentation annotation toolkit.

Fuses per-pixel predictions from multiple segmentation models into a
confidence-scored label map, isolates unreliable pixels for human
annotation, and provides instance splitting, privacy blurring, dataset
cataloging, and an evaluation-metric suite.
"""

from .errors import (
    ConflictError,
    FormatError,
    GoneError,
    NotFoundError,
    PreconditionError,
    SegfuseError,
    UnresolvedPixelsError,
    ValidationError,
)
from .fusion import (
    ConfidenceGrid,
    EditOp,
    FusedResult,
    FusionConfig,
    FusionStats,
    TiePolicy,
    fuse,
    merge_manual,
    uncertainty_map,
    weight_search,
)
from .instances import (
    InstanceMap,
    MergeEdit,
    SplitEdit,
    apply_instance_edits,
    split_instances,
)
from .manifest import ManifestEntry, Split, Status, filter_entries, split_dataset
from .metrics import (
    APReport,
    IoUReport,
    MaskedDistanceConfig,
    StatsReport,
    dataset_stats,
    disagreement_fraction,
    instance_ap,
    masked_weighted_l1,
    miou,
)
from .privacy import BBox, blur_regions
from .raster import (
    CITYSCAPES_19,
    DEFAULT_CATALOG,
    DEFAULT_INSTANCE_CLASSES,
    SENTINEL,
    BitMask,
    ClassCatalog,
    ClassDef,
    Image,
    LabelMap,
    decode_label_map,
    encode_label_map,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
