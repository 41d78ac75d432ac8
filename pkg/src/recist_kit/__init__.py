"""RECIST pseudo masks, hard negative mining and FROC evaluation for lesion detection."""

__version__ = "0.1.0"

from .errors import (
    BothEmpty,
    DegenerateArm,
    InvalidRecist,
    MissingMask,
    NoGroundTruth,
    ParallelDiameters,
    ParseError,
    PlacementFailure,
    RecistKitError,
    RleLengthMismatch,
    ZeroLengthDiameter,
)
from .froc import FrocCurve, FrocPoint, ImageRecord, OperatingPoint, compute_froc, sensitivity_at
from .geometry import (
    BinaryMask,
    Point2,
    QuarterRegion,
    RecistAnnotation,
    diameter_center,
    mask_area,
    normalize_recist,
    quarter_regions,
    rasterize_pseudo_mask,
)
from .hnem import Branch, MiningOutcome, compute_s2, mine_dataset, mine_hard_negatives
from .metrics import BBox, Detection, GroundTruth, box_iou, mask_iou, match_detections
