"""Readers and writers for annotation CSVs, detection JSON lines and mask files.

Annotation CSV columns (DeepLesion-style names are accepted as aliases)::

    image_id                 File_name
    measurement_coordinates  Measurement_coordinates  "x1, y1, x2, y2, x3, y3, x4, y4"
    bounding_box             Bounding_boxes           "x_min, y_min, x_max, y_max"
    split                    Train_Val_Test           train|val|test (or 1|2|3)

The first two measurement points are the long diameter, the last two the
short one.

Detection JSON lines::

    {"image_id": "...", "box": [x_min, y_min, x_max, y_max], "score": 0.93,
     "mask_rle": "origin_x origin_y width height run0 run1 ..."}

``mask_rle`` is optional. Runs alternate background/foreground over the
row-major window, starting with a (possibly zero) background run.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

from .errors import InvalidRecist, ParseError, RleLengthMismatch
from .froc import ImageRecord
from .geometry import BinaryMask, RecistAnnotation, crossing_parameters, normalize_recist, quarter_regions
from .metrics import BBox, Detection, GroundTruth

log = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
_SPLIT_CODES = {"1": "train", "2": "val", "3": "test"}

ANNOTATION_COLUMNS = ("image_id", "measurement_coordinates", "bounding_box", "split")
_COLUMN_ALIASES = {
    "file_name": "image_id",
    "measurement_coordinates": "measurement_coordinates",
    "bounding_boxes": "bounding_box",
    "train_val_test": "split",
}

# Slack allowed between a RECIST endpoint and its GT box before warning.
BOX_SLACK_PX = 2.0


# --------------------------------------------------------------------------- RLE

def encode_rle(mask: BinaryMask) -> str:
    flat = mask.bits.ravel()
    change = np.flatnonzero(np.diff(flat.astype(np.int8))) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs.insert(0, 0)
    head = [mask.origin_x, mask.origin_y, mask.width, mask.height]
    return " ".join(str(v) for v in head + runs)


def decode_rle(text: str) -> BinaryMask:
    try:
        values = [int(tok) for tok in text.split()]
    except ValueError as exc:
        raise ParseError(f"bad RLE token: {exc}") from None
    if len(values) < 4:
        raise ParseError("RLE needs origin_x origin_y width height")
    ox, oy, w, h = values[:4]
    runs = values[4:]
    if w <= 0 or h <= 0:
        raise ParseError(f"RLE window must be positive, got {w}x{h}")
    if any(r < 0 for r in runs):
        raise ParseError("negative RLE run")
    total = sum(runs)
    if total != w * h:
        raise RleLengthMismatch(f"RLE runs cover {total} pixels, window has {w * h}")
    flat = np.zeros(w * h, dtype=bool)
    pos = 0
    for k, r in enumerate(runs):
        if k % 2:
            flat[pos:pos + r] = True
        pos += r
    return BinaryMask(ox, oy, flat.reshape(h, w))


# --------------------------------------------------------------------------- PNG

def sidecar_path(png_path) -> Path:
    return Path(png_path).with_suffix(".json")


def write_mask_png(mask: BinaryMask, path) -> None:
    """8-bit grayscale PNG (0/255) of the mask window plus a JSON sidecar with the origin."""
    path = Path(path)
    Image.fromarray(mask.bits.astype(np.uint8) * 255, mode="L").save(path, format="PNG")
    meta = {"origin_x": mask.origin_x, "origin_y": mask.origin_y, "width": mask.width, "height": mask.height}
    sidecar_path(path).write_text(json.dumps(meta, sort_keys=True) + "\n")


def read_mask_png(path) -> BinaryMask:
    path = Path(path)
    meta = json.loads(sidecar_path(path).read_text())
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    if arr.shape != (meta["height"], meta["width"]):
        raise ParseError(f"PNG size {arr.shape[::-1]} disagrees with sidecar", path=path)
    return BinaryMask(meta["origin_x"], meta["origin_y"], arr > 127)


def write_mask_rle(mask: BinaryMask, path) -> None:
    Path(path).write_text(encode_rle(mask) + "\n")


def read_mask_rle(path) -> BinaryMask:
    return decode_rle(Path(path).read_text())


def safe_name(image_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", image_id)


# --------------------------------------------------------------------------- annotations

@dataclass
class AnnotationRow:
    image_id: str
    recist_coords: tuple[float, ...]
    gt_box: tuple[float, float, float, float]
    split: str


@dataclass
class LoadReport:
    rows: int = 0
    loaded: int = 0
    skipped: int = 0
    warnings: list[str] = field(default_factory=list)

    def warn(self, msg: str) -> None:
        self.warnings.append(msg)
        log.warning(msg)


def _floats(text: str, n: int, what: str, line: int, path) -> tuple[float, ...]:
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    if len(parts) != n:
        raise ParseError(f"{what}: expected {n} numbers, got {len(parts)}", line, path)
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise ParseError(f"{what}: non-numeric value in {text!r}", line, path) from None


def _format_floats(values: Iterable[float]) -> str:
    return ", ".join(repr(float(v)) for v in values)


def _normalize_header(fields: Sequence[str] | None, path) -> dict[str, str]:
    if not fields:
        raise ParseError("missing CSV header", 1, path)
    mapping = {}
    for name in fields:
        key = name.strip().lower()
        key = _COLUMN_ALIASES.get(key, key)
        if key in ANNOTATION_COLUMNS:
            mapping[key] = name
    missing = [c for c in ANNOTATION_COLUMNS if c not in mapping]
    if missing:
        raise ParseError(f"missing column(s): {', '.join(missing)}", 1, path)
    return mapping


def parse_split(value: str, line: int, path) -> str:
    v = value.strip().lower()
    v = _SPLIT_CODES.get(v, v)
    if v not in SPLITS:
        raise ParseError(f"unknown split {value!r}", line, path)
    return v


def read_annotation_rows(path) -> Iterable[tuple[int, AnnotationRow]]:
    """Yield (line number, row); raises ParseError on malformed structure."""
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        cols = _normalize_header(reader.fieldnames, path)
        for raw in reader:
            line = reader.line_num
            if not any((v or "").strip() for v in raw.values()):
                continue
            image_id = (raw[cols["image_id"]] or "").strip()
            if not image_id:
                raise ParseError("empty image_id", line, path)
            coords = _floats(raw[cols["measurement_coordinates"]] or "", 8, "measurement_coordinates", line, path)
            box = _floats(raw[cols["bounding_box"]] or "", 4, "bounding_box", line, path)
            split = parse_split(raw[cols["split"]] or "", line, path)
            yield line, AnnotationRow(image_id, coords, box, split)


def _check_row(row: AnnotationRow, line: int, report: LoadReport) -> GroundTruth | None:
    c = row.recist_coords
    try:
        if not all(math.isfinite(v) for v in c):
            raise InvalidRecist("non-finite measurement coordinate")
        recist = normalize_recist((c[0], c[1]), (c[2], c[3]), (c[4], c[5]), (c[6], c[7]))
        # raises DegenerateArm now rather than when the mask is first built
        quarter_regions(recist)
    except InvalidRecist as exc:
        report.warn(f"line {line}: skipped {row.image_id}: {type(exc).__name__}: {exc}")
        return None
    try:
        box = BBox.validated(row.gt_box)
    except ValueError as exc:
        report.warn(f"line {line}: skipped {row.image_id}: invalid bounding box: {exc}")
        return None
    for p in recist.endpoints():
        if not box.contains_point(p.x, p.y, BOX_SLACK_PX):
            report.warn(f"line {line}: {row.image_id}: RECIST endpoint ({p.x:g}, {p.y:g}) outside bounding box")
            break
    t, s = crossing_parameters(recist)
    if not (0.0 <= t <= 1.0 and 0.0 <= s <= 1.0):
        report.warn(f"line {line}: {row.image_id}: diameters do not cross within both segments")
    return GroundTruth(box, recist=recist)


def load_annotations(path, split_filter: str | None = None) -> tuple[list[ImageRecord], LoadReport]:
    """Group annotation rows into ImageRecords (ground truth only).

    Rows with invalid RECIST geometry or boxes are skipped with a warning;
    rows outside ``split_filter`` are not counted at all.
    """
    if split_filter is not None and split_filter not in SPLITS:
        raise ValueError(f"split_filter must be one of {SPLITS}")
    report = LoadReport()
    records: dict[str, ImageRecord] = {}
    for line, row in read_annotation_rows(path):
        if split_filter is not None and row.split != split_filter:
            continue
        report.rows += 1
        gt = _check_row(row, line, report)
        if gt is None:
            report.skipped += 1
            continue
        report.loaded += 1
        rec = records.get(row.image_id)
        if rec is None:
            rec = records[row.image_id] = ImageRecord(row.image_id, split=row.split)
        rec.gts.append(gt)
    return list(records.values()), report


def write_annotations(rows: Iterable[AnnotationRow], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(ANNOTATION_COLUMNS)
        for r in rows:
            w.writerow([r.image_id, _format_floats(r.recist_coords), _format_floats(r.gt_box), r.split])


def recist_row(image_id: str, recist: RecistAnnotation, box, split: str) -> AnnotationRow:
    coords = tuple(v for p in recist.endpoints() for v in p)
    return AnnotationRow(image_id, coords, tuple(box), split)


# --------------------------------------------------------------------------- detections

@dataclass
class DetectionFileEntry:
    image_id: str
    box: tuple[float, float, float, float]
    score: float
    mask_rle: str | None = None

    def to_detection(self) -> Detection:
        mask = decode_rle(self.mask_rle) if self.mask_rle is not None else None
        return Detection(BBox(*self.box), self.score, mask=mask)

    def to_json(self) -> str:
        obj = {"image_id": self.image_id, "box": [float(v) for v in self.box], "score": float(self.score)}
        if self.mask_rle is not None:
            obj["mask_rle"] = self.mask_rle
        return json.dumps(obj)


@dataclass
class DetectionReport:
    loaded: int = 0
    orphans: dict[str, int] = field(default_factory=dict)


def read_detection_entries(path) -> Iterable[tuple[int, DetectionFileEntry, Detection]]:
    with open(path) as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                entry = DetectionFileEntry(
                    str(obj["image_id"]),
                    tuple(float(v) for v in obj["box"]),
                    float(obj["score"]),
                    obj.get("mask_rle"),
                )
                if len(entry.box) != 4:
                    raise ValueError("box needs 4 numbers")
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"bad detection entry: {exc}", line_no, path) from None
            try:
                det = entry.to_detection()
            except RleLengthMismatch as exc:
                raise RleLengthMismatch(str(exc), line_no, path) from None
            except ParseError as exc:
                raise ParseError(str(exc), line_no, path) from None
            except ValueError as exc:
                raise ParseError(f"bad detection entry: {exc}", line_no, path) from None
            yield line_no, entry, det


def load_detections(path, records: Sequence[ImageRecord]) -> DetectionReport:
    """Attach detections to ``records`` by image_id; unknown ids go to ``orphans``."""
    by_id = {r.image_id: r for r in records}
    report = DetectionReport()
    for _, entry, det in read_detection_entries(path):
        rec = by_id.get(entry.image_id)
        if rec is None:
            report.orphans[entry.image_id] = report.orphans.get(entry.image_id, 0) + 1
            continue
        rec.dets.append(det)
        report.loaded += 1
    return report


def write_detections(entries: Iterable[DetectionFileEntry], path) -> None:
    with open(path, "w") as f:
        for e in entries:
            f.write(e.to_json() + "\n")
