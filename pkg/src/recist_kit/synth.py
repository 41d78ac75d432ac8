"""Seeded synthetic lesion datasets with known TP/FP structure.

Every image gets perpendicular RECIST crosses as ground truth, one detection
per lesion (box jittered, mask noised) and a Poisson number of false
positives kept away from every lesion (box IoU <= 0.1). All draws come from
one sequential ``numpy`` PCG64 stream seeded by the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import PlacementFailure
from .fileio import AnnotationRow, DetectionFileEntry, encode_rle, recist_row
from .geometry import BinaryMask, perpendicular_recist, rasterize_pseudo_mask
from .metrics import BBox, box_iou, mask_bbox

FP_MAX_IOU = 0.1
MAX_ATTEMPTS = 1000

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


@dataclass
class SynthConfig:
    n_images: int = 50
    lesions_per_image: tuple[int, int] = (1, 3)
    image_size: int = 512
    arm_length: tuple[float, float] = (8.0, 40.0)
    tp_score_mean: float = 0.9
    tp_score_std: float = 0.05
    fp_per_image_rate: float = 2.0
    fp_score_mean: float = 0.5
    fp_score_std: float = 0.1
    jitter_px: float = 0.0
    mask_noise: float = 0.0
    split: str = "test"

    def __post_init__(self):
        self.lesions_per_image = tuple(int(v) for v in self.lesions_per_image)
        self.arm_length = tuple(float(v) for v in self.arm_length)
        lo, hi = self.lesions_per_image
        if self.n_images < 1:
            raise ValueError("n_images must be >= 1")
        if not 0 <= lo <= hi:
            raise ValueError("lesions_per_image must be an ordered non-negative range")
        a_lo, a_hi = self.arm_length
        if not 1.0 <= a_lo <= a_hi:
            raise ValueError("arm_length must be an ordered range starting at >= 1 px")
        if 2 * a_hi + 4 >= self.image_size:
            raise ValueError("image_size too small for the arm length range")
        for name in ("tp_score_std", "fp_per_image_rate", "fp_score_std", "jitter_px"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 <= self.mask_noise <= 1.0:
            raise ValueError("mask_noise must lie in [0, 1]")

    @classmethod
    def from_toml(cls, path) -> "SynthConfig":
        with open(path, "rb") as f:
            data = tomllib.load(f)
        data = data.get("synth", data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown synth config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class SynthDataset:
    annotations: list[AnnotationRow]
    detections: list[DetectionFileEntry]
    n_fp: int


def _score(rng: np.random.Generator, mean: float, std: float) -> float:
    return float(np.clip(rng.normal(mean, std), 0.0, 1.0))


def _random_lesion(rng, cfg: SynthConfig):
    a_lo, a_hi = cfg.arm_length
    arms = tuple(float(v) for v in rng.uniform(a_lo, a_hi, size=4))
    margin = a_hi + 2
    center = tuple(float(v) for v in rng.uniform(margin, cfg.image_size - margin, size=2))
    angle = float(rng.uniform(0.0, math.pi))
    recist = perpendicular_recist(center, angle, arms)
    mask = rasterize_pseudo_mask(recist)
    return recist, mask, mask_bbox(mask)


def _noisy_mask(rng, mask: BinaryMask, dx: int, dy: int, noise: float) -> BinaryMask:
    bits = mask.bits.copy()
    if noise > 0:
        bits ^= rng.random(bits.shape) < noise
    return BinaryMask(mask.origin_x + dx, mask.origin_y + dy, bits)


def _jitter_box(rng, box: BBox, jitter: float) -> BBox:
    if jitter == 0:
        return box
    d = rng.uniform(-jitter, jitter, size=4)
    x0, y0 = box.x_min + d[0], box.y_min + d[1]
    x1, y1 = max(box.x_max + d[2], x0 + 1.0), max(box.y_max + d[3], y0 + 1.0)
    return BBox(float(x0), float(y0), float(x1), float(y1))


def generate(cfg: SynthConfig, seed: int) -> SynthDataset:
    rng = np.random.Generator(np.random.PCG64(seed))
    annotations: list[AnnotationRow] = []
    detections: list[DetectionFileEntry] = []
    n_fp_total = 0
    lo, hi = cfg.lesions_per_image
    for i in range(cfg.n_images):
        image_id = f"synth_{i:05d}"
        n_lesions = int(rng.integers(lo, hi + 1))
        gt_boxes: list[BBox] = []
        for _ in range(n_lesions):
            for _attempt in range(MAX_ATTEMPTS):
                recist, mask, box = _random_lesion(rng, cfg)
                if all(box_iou(box, other) == 0.0 for other in gt_boxes):
                    break
            else:
                raise PlacementFailure(f"{image_id}: could not place {n_lesions} disjoint lesions")
            gt_boxes.append(box)
            annotations.append(recist_row(image_id, recist, box, cfg.split))
            det_box = _jitter_box(rng, box, cfg.jitter_px)
            dx = round((det_box.x_min - box.x_min + det_box.x_max - box.x_max) / 2)
            dy = round((det_box.y_min - box.y_min + det_box.y_max - box.y_max) / 2)
            det_mask = _noisy_mask(rng, mask, dx, dy, cfg.mask_noise)
            score = _score(rng, cfg.tp_score_mean, cfg.tp_score_std)
            detections.append(DetectionFileEntry(image_id, tuple(det_box), score, encode_rle(det_mask)))

        n_fp = int(rng.poisson(cfg.fp_per_image_rate))
        for _ in range(n_fp):
            for _attempt in range(MAX_ATTEMPTS):
                _, mask, box = _random_lesion(rng, cfg)
                if all(box_iou(box, g) <= FP_MAX_IOU for g in gt_boxes):
                    break
            else:
                raise PlacementFailure(f"{image_id}: no false-positive placement with IoU <= {FP_MAX_IOU}")
            det_mask = _noisy_mask(rng, mask, 0, 0, cfg.mask_noise)
            score = _score(rng, cfg.fp_score_mean, cfg.fp_score_std)
            detections.append(DetectionFileEntry(image_id, tuple(box), score, encode_rle(det_mask)))
        n_fp_total += n_fp
    return SynthDataset(annotations, detections, n_fp_total)
