"""Command line entry point: ``recist-kit {pseudomask,eval,mine,synth}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path

from . import __version__
from .errors import RecistKitError
from .fileio import (
    load_annotations,
    load_detections,
    safe_name,
    write_annotations,
    write_detections,
    write_mask_png,
    write_mask_rle,
)
from .froc import compute_froc, operating_points, write_curve_csv, write_operating_points_csv
from .hnem import mine_dataset
from .synth import SynthConfig, generate

log = logging.getLogger("recist_kit")

THREADS_ENV = "RECIST_KIT_THREADS"


def worker_count() -> int:
    default = min(8, os.cpu_count() or 1)
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return default
    try:
        n = int(raw)
    except ValueError:
        raise RecistKitError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return n if n > 0 else default


@contextmanager
def mapper():
    """Yield an order-preserving map over a worker pool (plain map for one worker)."""
    n = worker_count()
    if n == 1:
        yield map
        return
    with ThreadPoolExecutor(max_workers=n) as pool:
        yield pool.map


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _load(args, with_detections: bool):
    records, report = load_annotations(args.annotations, args.split)
    print(
        f"annotations: {report.rows} rows, {report.loaded} loaded, {report.skipped} skipped, "
        f"{len(records)} images",
        file=sys.stderr,
    )
    if with_detections:
        det_report = load_detections(args.detections, records)
        print(f"detections: {det_report.loaded} loaded", file=sys.stderr)
        if det_report.orphans:
            n = sum(det_report.orphans.values())
            ids = ", ".join(sorted(det_report.orphans)[:10])
            log.warning("%d detections for %d unknown image ids (orphans): %s", n, len(det_report.orphans), ids)
    return sorted(records, key=lambda r: r.image_id)


def cmd_pseudomask(args) -> int:
    records = _load(args, with_detections=False)
    if args.image_id is not None:
        records = [r for r in records if r.image_id == args.image_id]
        if not records:
            raise RecistKitError(f"image id {args.image_id!r} not found")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(f"{safe_name(r.image_id)}_{k:02d}", gt) for r in records for k, gt in enumerate(r.gts)]
    with mapper() as m:
        masks = list(m(lambda job: job[1].pseudo_mask, jobs))
    for (stem, _), mask in zip(jobs, masks):
        if args.format == "png":
            write_mask_png(mask, out / f"{stem}.png")
        else:
            write_mask_rle(mask, out / f"{stem}.rle")
    print(f"pseudomask: wrote {len(jobs)} masks to {out}", file=sys.stderr)
    return 0


def cmd_eval(args) -> int:
    records = _load(args, with_detections=True)
    curve = compute_froc(records, args.iou)
    ops = operating_points(curve)
    write_curve_csv(curve, args.froc_out)
    write_operating_points_csv(ops, args.ops_out)
    for op in ops:
        flag = " (saturated)" if op.saturated else ""
        print(f"sensitivity @ {op.afp_target:g} FP/image: {op.sensitivity:.4f}{flag}", file=sys.stderr)
    return 0


def cmd_mine(args) -> int:
    records = _load(args, with_detections=True)
    with mapper() as m:
        outcomes = mine_dataset(records, args.seed, map_fn=m)
    with open(args.out, "w") as f:
        for image_id, outcome in outcomes:
            f.write(outcome.to_json(image_id) + "\n")
    n_mined = sum(len(o.mined) for _, o in outcomes)
    print(f"mine: {n_mined} hard negatives over {len(outcomes)} images", file=sys.stderr)
    return 0


def cmd_synth(args) -> int:
    cfg = SynthConfig.from_toml(args.config)
    data = generate(cfg, args.seed)
    write_annotations(data.annotations, args.out_annotations)
    write_detections(data.detections, args.out_detections)
    print(
        f"synth: {cfg.n_images} images, {len(data.annotations)} lesions, "
        f"{len(data.detections)} detections ({data.n_fp} false positives)",
        file=sys.stderr,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="recist-kit", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-q", "--quiet", action="store_true", help="suppress warnings")
    sub = p.add_subparsers(dest="command", required=True)

    def annotations(sp):
        sp.add_argument("--annotations", required=True, help="annotation CSV")
        sp.add_argument("--split", choices=("train", "val", "test"), help="keep only this split")

    sp = sub.add_parser("pseudomask", help="rasterize RECIST pseudo masks")
    annotations(sp)
    sp.add_argument("--image-id")
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--format", choices=("png", "rle"), default="png")
    sp.set_defaults(func=cmd_pseudomask)

    sp = sub.add_parser("eval", help="FROC curve and sensitivity at fixed FP/image")
    annotations(sp)
    sp.add_argument("--detections", required=True, help="detection JSON lines")
    sp.add_argument("--iou", type=float, default=0.5)
    sp.add_argument("--froc-out", required=True)
    sp.add_argument("--ops-out", required=True)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("mine", help="hard negative example mining")
    annotations(sp)
    sp.add_argument("--detections", required=True)
    sp.add_argument("--seed", type=_u64, required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_mine)

    sp = sub.add_parser("synth", help="generate a synthetic dataset")
    sp.add_argument("--config", required=True, help="TOML config")
    sp.add_argument("--seed", type=_u64, required=True)
    sp.add_argument("--out-annotations", required=True)
    sp.add_argument("--out-detections", required=True)
    sp.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.WARNING,
        format="recist-kit: %(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (RecistKitError, OSError, ValueError) as exc:
        print(f"recist-kit: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
