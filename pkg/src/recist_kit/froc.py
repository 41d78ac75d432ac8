"""FROC curves and sensitivity at fixed average false positives per image."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from .errors import NoGroundTruth
from .metrics import DEFAULT_IOU_THRESHOLD, Detection, GroundTruth, match_detections, score_order

# Average-FP-per-image targets reported for lesion detection benchmarks.
OPERATING_POINTS = (0.5, 1.0, 2.0, 4.0, 8.0, 16.0)


@dataclass
class ImageRecord:
    image_id: str
    gts: list[GroundTruth] = field(default_factory=list)
    dets: list[Detection] = field(default_factory=list)
    split: str | None = None

    def __post_init__(self):
        if not self.image_id:
            raise ValueError("image_id must be non-empty")


class FrocPoint(NamedTuple):
    threshold: float
    avg_fp_per_image: float
    sensitivity: float


class OperatingPoint(NamedTuple):
    afp_target: float
    sensitivity: float
    saturated: bool


@dataclass
class FrocCurve:
    points: list[FrocPoint]
    n_images: int
    n_gts: int

    @property
    def max_avg_fp(self) -> float:
        return self.points[-1].avg_fp_per_image if self.points else 0.0

    @property
    def max_sensitivity(self) -> float:
        return self.points[-1].sensitivity if self.points else 0.0


def check_unique_ids(dataset: Sequence[ImageRecord]) -> None:
    seen = set()
    for rec in dataset:
        if rec.image_id in seen:
            raise ValueError(f"duplicate image_id {rec.image_id!r}")
        seen.add(rec.image_id)


def compute_froc(
    dataset: Sequence[ImageRecord],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
) -> FrocCurve:
    """Sweep the score threshold over every distinct detection score.

    Greedy matching visits detections in descending score order, so the
    matching of the detections kept at threshold ``t`` is a prefix of the
    full matching. Each image is therefore matched once and the curve is
    assembled from cumulative TP/FP counts.
    """
    check_unique_ids(dataset)
    n_gts = sum(len(rec.gts) for rec in dataset)
    if n_gts == 0:
        raise NoGroundTruth("dataset contains no ground-truth lesions")
    n_images = len(dataset)

    events: list[tuple[float, bool]] = []
    for rec in dataset:
        result = match_detections(rec.dets, rec.gts, iou_threshold)
        events.extend((d.score_s1, tp) for d, tp in zip(rec.dets, result.is_tp))
    events.sort(key=lambda e: -e[0])

    points = []
    tp = fp = 0
    k = 0
    while k < len(events):
        t = events[k][0]
        while k < len(events) and events[k][0] == t:
            if events[k][1]:
                tp += 1
            else:
                fp += 1
            k += 1
        points.append(FrocPoint(t, fp / n_images, tp / n_gts))
    return FrocCurve(points, n_images, n_gts)


def sensitivity_at(curve: FrocCurve, target_afp: float) -> OperatingPoint:
    """Step readout of the curve at ``target_afp`` (no interpolation).

    Returns the sensitivity of the last point whose average FP count does not
    exceed the target. When the curve ends below the target it cannot be read
    there: the terminal sensitivity is returned with ``saturated=True``.
    """
    if not target_afp > 0:
        raise ValueError(f"target_afp must be positive, got {target_afp}")
    best = 0.0
    for p in curve.points:
        if p.avg_fp_per_image <= target_afp:
            best = max(best, p.sensitivity)
    saturated = curve.max_avg_fp < target_afp
    if saturated:
        best = curve.max_sensitivity
    return OperatingPoint(target_afp, best, saturated)


def operating_points(
    curve: FrocCurve, targets: Iterable[float] = OPERATING_POINTS
) -> list[OperatingPoint]:
    return [sensitivity_at(curve, t) for t in targets]


def _fmt(x: float) -> str:
    return repr(float(x))


def write_curve_csv(curve: FrocCurve, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["threshold", "avg_fp_per_image", "sensitivity"])
        for p in curve.points:
            w.writerow([_fmt(p.threshold), _fmt(p.avg_fp_per_image), _fmt(p.sensitivity)])


def write_operating_points_csv(ops: Sequence[OperatingPoint], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["afp_target", "sensitivity", "saturated"])
        for op in ops:
            w.writerow([_fmt(op.afp_target), _fmt(op.sensitivity), str(op.saturated).lower()])


def read_curve_csv(path) -> list[FrocPoint]:
    with open(path, newline="") as f:
        return [
            FrocPoint(float(r["threshold"]), float(r["avg_fp_per_image"]), float(r["sensitivity"]))
            for r in csv.DictReader(f)
        ]
