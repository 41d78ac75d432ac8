import csv
import json
import subprocess
import sys

import pytest

from recist_kit.cli import main, worker_count
from recist_kit.fileio import read_mask_png, read_mask_rle
from recist_kit.geometry import normalize_recist, rasterize_pseudo_mask

SYNTH_TOML = """
n_images = 12
lesions_per_image = [1, 3]
tp_score_mean = 0.85
tp_score_std = 0.1
fp_per_image_rate = 2.0
fp_score_mean = 0.6
fp_score_std = 0.2
jitter_px = 2.0
mask_noise = 0.05
"""

PERFECT_TOML = """
n_images = 8
tp_score_mean = 1.0
tp_score_std = 0.0
fp_per_image_rate = 0.0
"""


def synth(tmp_path, text=SYNTH_TOML, seed=11):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text(text)
    ann, det = tmp_path / "ann.csv", tmp_path / "det.jsonl"
    assert main(["synth", "--config", str(cfg), "--seed", str(seed), "--out-annotations", str(ann), "--out-detections", str(det)]) == 0
    return ann, det


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_eval_perfect_detector(tmp_path):
    ann, det = synth(tmp_path, PERFECT_TOML)
    froc, ops = tmp_path / "froc.csv", tmp_path / "ops.csv"
    assert main(["eval", "--annotations", str(ann), "--detections", str(det), "--froc-out", str(froc), "--ops-out", str(ops)]) == 0
    rows = read_csv(ops)
    assert [float(r["afp_target"]) for r in rows] == [0.5, 1, 2, 4, 8, 16]
    assert all(float(r["sensitivity"]) == 1.0 for r in rows)


def test_eval_iou_exactly_half_is_fp(tmp_path):
    ann = tmp_path / "a.csv"
    ann.write_text('image_id,measurement_coordinates,bounding_box,split\nx,"0, 5, 10, 5, 5, 0, 5, 10","0, 0, 10, 10",test\n')
    det = tmp_path / "d.jsonl"
    det.write_text(json.dumps({"image_id": "x", "box": [0, 0, 10, 5], "score": 0.9}) + "\n")
    froc, ops = tmp_path / "froc.csv", tmp_path / "ops.csv"
    assert main(["eval", "--annotations", str(ann), "--detections", str(det), "--iou", "0.5", "--froc-out", str(froc), "--ops-out", str(ops)]) == 0
    assert read_csv(froc) == [{"threshold": "0.9", "avg_fp_per_image": "1.0", "sensitivity": "0.0"}]
    assert main(["eval", "--annotations", str(ann), "--detections", str(det), "--iou", "0.45", "--froc-out", str(froc), "--ops-out", str(ops)]) == 0
    assert read_csv(froc)[0]["sensitivity"] == "1.0"


@pytest.mark.parametrize("fmt", ["png", "rle"])
def test_pseudomask_writes_one_mask_per_gt(tmp_path, fmt):
    ann, _ = synth(tmp_path)
    out = tmp_path / "masks"
    assert main(["pseudomask", "--annotations", str(ann), "--out-dir", str(out), "--format", fmt]) == 0
    rows = read_csv(ann)
    files = sorted(out.glob(f"*.{fmt}"))
    assert len(files) == len(rows)
    first = rows[0]
    c = [float(v) for v in first["measurement_coordinates"].split(",")]
    expected = rasterize_pseudo_mask(normalize_recist(c[0:2], c[2:4], c[4:6], c[6:8]))
    reader = read_mask_png if fmt == "png" else read_mask_rle
    assert reader(out / f"{first['image_id']}_00.{fmt}") == expected


def test_pseudomask_single_image(tmp_path):
    ann, _ = synth(tmp_path)
    out = tmp_path / "one"
    assert main(["pseudomask", "--annotations", str(ann), "--image-id", "synth_00003", "--out-dir", str(out)]) == 0
    assert {p.name.split("_")[1] for p in out.glob("*.png")} == {"00003"}
    assert main(["pseudomask", "--annotations", str(ann), "--image-id", "nope", "--out-dir", str(out)]) == 1


def run_all(tmp_path, ann, det, tag):
    out = tmp_path / tag
    out.mkdir()
    assert main(["pseudomask", "--annotations", str(ann), "--out-dir", str(out / "masks")]) == 0
    assert main(["pseudomask", "--annotations", str(ann), "--out-dir", str(out / "rle"), "--format", "rle"]) == 0
    assert main(["eval", "--annotations", str(ann), "--detections", str(det), "--froc-out", str(out / "froc.csv"), "--ops-out", str(out / "ops.csv")]) == 0
    assert main(["mine", "--annotations", str(ann), "--detections", str(det), "--seed", "77", "--out", str(out / "mined.jsonl")]) == 0
    return {p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}


def test_outputs_byte_identical_across_runs_and_thread_counts(tmp_path, monkeypatch):
    ann, det = synth(tmp_path)
    monkeypatch.setenv("RECIST_KIT_THREADS", "1")
    a = run_all(tmp_path, ann, det, "a")
    b = run_all(tmp_path, ann, det, "b")
    monkeypatch.setenv("RECIST_KIT_THREADS", "4")
    c = run_all(tmp_path, ann, det, "c")
    assert a == b == c
    mined = [json.loads(line) for line in a[next(k for k in a if k.name == "mined.jsonl")].decode().splitlines()]
    assert [m["image_id"] for m in mined] == sorted(m["image_id"] for m in mined)
    assert set(mined[0]) == {"image_id", "branch", "anchor", "mined"}


def test_synth_is_byte_identical(tmp_path):
    (tmp_path / "1").mkdir()
    (tmp_path / "2").mkdir()
    a = synth(tmp_path / "1")
    b = synth(tmp_path / "2")
    assert all(x.read_bytes() == y.read_bytes() for x, y in zip(a, b))


def test_load_errors_exit_nonzero(tmp_path, capsys):
    ann, det = synth(tmp_path)
    bad = tmp_path / "bad.jsonl"
    bad.write_text(det.read_text().splitlines()[0] + "\n" + json.dumps({"image_id": "synth_00000", "box": [0, 0, 1, 1], "score": 0.5, "mask_rle": "0 0 2 2 1"}) + "\n")
    args = ["eval", "--annotations", str(ann), "--detections", str(bad), "--froc-out", str(tmp_path / "f"), "--ops-out", str(tmp_path / "o")]
    assert main(args) == 1
    assert ":2:" in capsys.readouterr().err
    assert main(["mine", "--annotations", str(tmp_path / "missing.csv"), "--detections", str(det), "--seed", "1", "--out", str(tmp_path / "m")]) == 1


def test_skipped_rows_reported_and_exit_zero(tmp_path, capsys, caplog):
    ann = tmp_path / "a.csv"
    ann.write_text(
        "image_id,measurement_coordinates,bounding_box,split\n"
        'x,"0, 5, 10, 5, 5, 0, 5, 10","0, 0, 10, 10",test\n'
        'y,"0, 0, 10, 0, 0, 1, 10, 1","0, 0, 10, 1",test\n'
    )
    assert main(["pseudomask", "--annotations", str(ann), "--out-dir", str(tmp_path / "m")]) == 0
    err = capsys.readouterr().err
    assert "2 rows, 1 loaded, 1 skipped" in err
    assert "ParallelDiameters" in caplog.text


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("RECIST_KIT_THREADS", "1")
    assert worker_count() == 1
    monkeypatch.setenv("RECIST_KIT_THREADS", "16")
    assert worker_count() == 16
    monkeypatch.setenv("RECIST_KIT_THREADS", "0")
    assert worker_count() >= 1
    monkeypatch.delenv("RECIST_KIT_THREADS")
    assert worker_count() >= 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "recist_kit", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("pseudomask", "eval", "mine", "synth"):
        assert cmd in res.stdout
