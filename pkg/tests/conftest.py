import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from recist_kit.froc import ImageRecord
from recist_kit.metrics import BBox, Detection, GroundTruth

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def random_scene(rng: np.random.Generator, n_images=None, max_dets=10, max_gts=4, score_levels=None):
    """Random boxes and scores; returns (records, oracle view).

    Detections are scattered around the GT boxes so that IoU values span
    (0, 1). ``score_levels`` quantizes scores to force ties.
    """
    n_images = n_images or int(rng.integers(1, 21))
    records, view = [], []
    for i in range(n_images):
        gts = []
        for _ in range(int(rng.integers(0, max_gts + 1))):
            x, y = rng.uniform(0, 200, 2)
            w, h = rng.uniform(5, 40, 2)
            gts.append((float(x), float(y), float(x + w), float(y + h)))
        dets = []
        for _ in range(int(rng.integers(0, max_dets + 1))):
            if gts and rng.random() < 0.7:
                g = gts[int(rng.integers(len(gts)))]
                j = rng.normal(0, 4, 4)
                box = (g[0] + j[0], g[1] + j[1], max(g[2] + j[2], g[0] + j[0] + 1), max(g[3] + j[3], g[1] + j[1] + 1))
            else:
                x, y = rng.uniform(0, 200, 2)
                w, h = rng.uniform(5, 40, 2)
                box = (x, y, x + w, y + h)
            score = float(rng.random())
            if score_levels:
                score = round(score * score_levels) / score_levels
            dets.append((score, tuple(float(v) for v in box)))
        records.append(
            ImageRecord(
                f"img{i:03d}",
                gts=[GroundTruth(BBox(*g)) for g in gts],
                dets=[Detection(BBox(*b), s) for s, b in dets],
            )
        )
        view.append((gts, dets))
    return records, view


@pytest.fixture
def two_image_dataset():
    """img1: TP@0.9 + FP@0.8; img2: FP@0.95 + TP@0.6."""
    g1 = BBox(0, 0, 10, 10)
    g2 = BBox(50, 50, 60, 60)
    return [
        ImageRecord(
            "img1",
            gts=[GroundTruth(g1)],
            dets=[Detection(g1, 0.9), Detection(BBox(100, 100, 110, 110), 0.8)],
        ),
        ImageRecord(
            "img2",
            gts=[GroundTruth(g2)],
            dets=[Detection(BBox(0, 100, 10, 110), 0.95), Detection(g2, 0.6)],
        ),
    ]


# One summary line per acceptance criterion (test docstrings name them).
_acceptance = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if item.module.__name__.endswith("test_acceptance") and report.when == "call":
        doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
        _acceptance.append((doc, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for doc, outcome in _acceptance:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {doc}")
