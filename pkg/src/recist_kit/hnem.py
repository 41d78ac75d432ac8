"""Hard negative example mining over per-image detection lists.

Each detection carries a classification score ``s1`` and a mask-overlap
score ``s2`` (IoU of its predicted mask with the lesion pseudo mask).

* If some detection has ``s2 > 0.3`` the best-overlapping one becomes the
  anchor, and negatives are drawn from detections scoring strictly higher
  in ``s1`` than the anchor.
* Otherwise negatives are drawn from detections with ``s1 > 0.7``.

At most three negatives are drawn, uniformly without replacement.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import MissingMask
from .metrics import Detection, GroundTruth, mask_iou

GOOD_OVERLAP = 0.3
HIGH_SCORE = 0.7
MAX_MINED = 3


class Branch(str, enum.Enum):
    GOOD_DETECTION = "GoodDetection"
    POOR_DETECTION = "PoorDetection"
    EMPTY = "Empty"


@dataclass(frozen=True)
class MiningOutcome:
    branch: Branch
    anchor: int | None
    mined: tuple[int, ...]
    # candidate pool the negatives were drawn from
    candidates: tuple[int, ...] = ()

    def to_json(self, image_id: str) -> str:
        return json.dumps(
            {
                "image_id": image_id,
                "branch": self.branch.value,
                "anchor": self.anchor,
                "mined": list(self.mined),
            }
        )


def compute_s2(det: Detection, gts: Sequence[GroundTruth]) -> float:
    """Best mask IoU between the detection's mask and any GT pseudo mask."""
    if det.mask is None:
        raise MissingMask("detection has no predicted mask")
    masks = [g.pseudo_mask for g in gts if g.pseudo_mask is not None]
    if not masks:
        raise MissingMask("no ground truth carries a pseudo mask")
    return max(mask_iou(det.mask, m) for m in masks)


def image_seed(rng_seed: int, image_id: str) -> int:
    """64-bit per-image seed: first 8 bytes (big-endian) of SHA-256 over "<seed>:<image_id>"."""
    digest = hashlib.sha256(f"{int(rng_seed)}:{image_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def _draw(pool: list[int], seed: int) -> tuple[int, ...]:
    m = min(MAX_MINED, len(pool))
    if m == 0:
        return ()
    rng = np.random.Generator(np.random.PCG64(seed))
    picked = rng.choice(len(pool), size=m, replace=False)
    return tuple(sorted(pool[k] for k in picked))


def mine_scores(s1: Sequence[float], s2: Sequence[float], rng_seed: int) -> MiningOutcome:
    """Apply the mining rule to one image's scores (parallel lists, one entry per detection)."""
    if len(s1) != len(s2):
        raise ValueError("s1 and s2 must have the same length")
    if not s1:
        return MiningOutcome(Branch.EMPTY, None, ())
    best = max(range(len(s2)), key=lambda i: (s2[i], -i))
    if s2[best] > GOOD_OVERLAP:
        pool = [j for j in range(len(s1)) if j != best and s1[j] > s1[best]]
        return MiningOutcome(Branch.GOOD_DETECTION, best, _draw(pool, rng_seed), tuple(pool))
    pool = [j for j in range(len(s1)) if s1[j] > HIGH_SCORE]
    return MiningOutcome(Branch.POOR_DETECTION, None, _draw(pool, rng_seed), tuple(pool))


def mine_hard_negatives(dets: Sequence[Detection], rng_seed: int) -> MiningOutcome:
    """Mine one image's detections; every ``score_s2`` must be populated."""
    missing = [i for i, d in enumerate(dets) if d.score_s2 is None]
    if missing:
        raise ValueError(f"detections {missing} lack score_s2")
    return mine_scores([d.score_s1 for d in dets], [d.score_s2 for d in dets], rng_seed)


def image_s2(dets: Sequence[Detection], gts: Sequence[GroundTruth]) -> list[float]:
    """Per-detection s2; detections without a mask (or images without GT masks) score 0."""
    out = []
    for d in dets:
        try:
            out.append(compute_s2(d, gts))
        except MissingMask:
            out.append(0.0)
    return out


def mine_image(image_id: str, dets, gts, rng_seed: int) -> MiningOutcome:
    s2 = image_s2(dets, gts)
    return mine_scores([d.score_s1 for d in dets], s2, image_seed(rng_seed, image_id))


def mine_dataset(dataset, rng_seed: int, map_fn=map) -> list[tuple[str, MiningOutcome]]:
    """Mine every image; each image's draws depend only on (rng_seed, image_id).

    ``map_fn`` may be an executor's ``map`` to fan out per-image work; the
    output order follows the input order.
    """
    outcomes = map_fn(lambda rec: mine_image(rec.image_id, rec.dets, rec.gts, rng_seed), dataset)
    return [(rec.image_id, out) for rec, out in zip(dataset, outcomes)]
