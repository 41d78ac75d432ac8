"""Box/mask IoU and greedy TP/FP labeling of detections."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import BothEmpty
from .geometry import BinaryMask, RecistAnnotation, rasterize_pseudo_mask

DEFAULT_IOU_THRESHOLD = 0.5


class BBox(NamedTuple):
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    @classmethod
    def validated(cls, coords) -> "BBox":
        b = cls(*(float(c) for c in coords))
        if not all(math.isfinite(c) for c in b):
            raise ValueError(f"non-finite box {coords!r}")
        if not (b.x_max > b.x_min and b.y_max > b.y_min):
            raise ValueError(f"degenerate box {coords!r}")
        return b

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def contains_point(self, x: float, y: float, slack: float = 0.0) -> bool:
        return (
            self.x_min - slack <= x <= self.x_max + slack
            and self.y_min - slack <= y <= self.y_max + slack
        )


def mask_bbox(m: BinaryMask) -> BBox | None:
    bounds = m.tight_bounds()
    return None if bounds is None else BBox(*(float(v) for v in bounds))


def _check_unit(name: str, value: float | None) -> None:
    if value is not None and not (0.0 <= value <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")


@dataclass
class Detection:
    box: BBox
    score_s1: float
    mask: BinaryMask | None = None
    score_s2: float | None = None

    def __post_init__(self):
        self.box = BBox.validated(self.box)
        self.score_s1 = float(self.score_s1)
        _check_unit("score_s1", self.score_s1)
        _check_unit("score_s2", self.score_s2)


@dataclass
class GroundTruth:
    """A reference lesion.

    ``pseudo_mask`` returns the explicit ``mask`` when given, otherwise it is
    rasterized from ``recist`` on first access and cached.
    """

    box: BBox
    recist: RecistAnnotation | None = None
    mask: BinaryMask | None = None
    _cached: BinaryMask | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.box = BBox.validated(self.box)
        if self.mask is not None and self.mask.area() == 0:
            raise ValueError("ground-truth pseudo mask is empty")

    @property
    def pseudo_mask(self) -> BinaryMask | None:
        if self.mask is not None:
            return self.mask
        if self.recist is None:
            return None
        if self._cached is None:
            self._cached = rasterize_pseudo_mask(self.recist)
        return self._cached


def box_iou(a: BBox, b: BBox) -> float:
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union


def mask_iou(a: BinaryMask, b: BinaryMask) -> float:
    """IoU of two masks compared in image coordinates.

    Raises :class:`BothEmpty` when neither mask has a set pixel.
    """
    area_a, area_b = a.area(), b.area()
    if area_a == 0 and area_b == 0:
        raise BothEmpty("IoU of two empty masks is undefined")
    x0, y0 = max(a.origin_x, b.origin_x), max(a.origin_y, b.origin_y)
    x1 = min(a.origin_x + a.width, b.origin_x + b.width)
    y1 = min(a.origin_y + a.height, b.origin_y + b.height)
    inter = 0
    if x0 < x1 and y0 < y1:
        inter = int(np.count_nonzero(a.crop(x0, y0, x1, y1) & b.crop(x0, y0, x1, y1)))
    return inter / (area_a + area_b - inter)


@dataclass
class MatchResult:
    is_tp: list[bool]
    gt_matched: list[bool]
    # index of the matched GT per detection, None for false positives
    assigned_gt: list[int | None]

    @property
    def n_tp(self) -> int:
        return sum(self.is_tp)

    @property
    def n_fp(self) -> int:
        return len(self.is_tp) - self.n_tp


def score_order(scores: Sequence[float]) -> list[int]:
    """Indices by descending score, ties by ascending index."""
    return sorted(range(len(scores)), key=lambda i: (-scores[i], i))


def match_detections(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> MatchResult:
    """Greedy matching in descending score order.

    A detection is a TP when its box IoU with some still-unmatched GT is
    strictly greater than ``iou_threshold``; it takes the highest-IoU such GT
    (lowest GT index on ties). Every other detection is an FP.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError(f"iou_threshold must lie in (0, 1), got {iou_threshold}")
    is_tp = [False] * len(dets)
    assigned: list[int | None] = [None] * len(dets)
    gt_matched = [False] * len(gts)
    for i in score_order([d.score_s1 for d in dets]):
        best, best_iou = None, iou_threshold
        for g, gt in enumerate(gts):
            if gt_matched[g]:
                continue
            iou = box_iou(dets[i].box, gt.box)
            if iou > best_iou:
                best, best_iou = g, iou
        if best is not None:
            gt_matched[best] = True
            is_tp[i] = True
            assigned[i] = best
    return MatchResult(is_tp, gt_matched, assigned)
