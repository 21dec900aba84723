"""Command-line entry point: ``smctrack {track,eval,synth,selfcheck,desk}``.

Exit status is 0 on success, 1 when a selfcheck suite fails and 2 for bad
input (missing files, malformed files, invalid configuration, frame-range
mismatch between ground truth and results).
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from ..association import FUSION_MODES, TrackerConfig, Tracker, run_sequence
from ..errors import SmcTrackError
from ..evaluation import DEFAULT_IOU_THRESHOLD, check_frame_range, evaluate
from .config import load_config
from .mot_csv import parse_gt_csv, parse_mot_csv, write_detections_csv, write_gt_csv, write_results_csv
from .sidecar import read_sidecar, write_sidecar
from .svg import write_bar_chart
from .synth import ScenarioSpec, generate_scenario

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2


class UsageError(Exception):
    pass


def _seed(value: Optional[int]) -> int:
    if value is not None:
        return value
    env = os.environ.get("SMCTRACK_SEED")
    if env is None or not env.strip():
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"SMCTRACK_SEED must be an integer, got {env!r}") from None


def _require(*paths) -> None:
    for p in paths:
        if p is not None and not Path(p).is_file():
            raise UsageError(f"no such file: {p}")


def cmd_track(args) -> int:
    _require(args.det, args.emb, args.config)
    cfg = load_config(args.config) if args.config else TrackerConfig()
    if args.fusion:
        cfg = dataclasses.replace(cfg, fusion_mode=args.fusion)
    seed = _seed(args.seed)
    embeddings = read_sidecar(args.emb) if args.emb else None
    frames = parse_mot_csv(args.det, embeddings)
    tracker = Tracker(cfg)
    t0 = time.perf_counter()
    results = run_sequence(frames, cfg, tracker)
    elapsed = time.perf_counter() - t0
    write_results_csv(results, args.out)
    n_frames = (frames[-1].frame - frames[0].frame + 1) if frames else 0
    fps = n_frames / elapsed if elapsed > 0 else float("inf")
    print(f"sequence {args.det}: frames {n_frames}  tracks created {tracker.tracks_created}  "
          f"ids emitted {len({r.id for r in results})}  fps {fps:.1f}  "
          f"fusion {cfg.fusion_mode}  seed {seed}")
    return EXIT_OK


def cmd_eval(args) -> int:
    _require(args.gt, args.res)
    gt = parse_gt_csv(args.gt)
    res = parse_gt_csv(args.res)
    check_frame_range(gt, res)
    report = evaluate(gt, res, args.iou_thresh)
    print(report.to_text())
    if args.report:
        Path(args.report).write_text(report.to_csv())
    plot = args.plot or (Path(args.report).with_suffix(".svg") if args.report else None)
    if plot:
        v = report.values()
        write_bar_chart({k: v[k] for k in ("MOTA", "IDF1", "MT", "ML", "meanIoU")}, plot,
                        title=f"{Path(args.res).name} vs {Path(args.gt).name}")
    return EXIT_OK


def cmd_synth(args) -> int:
    _require(args.spec)
    spec = ScenarioSpec.load(args.spec)
    if args.seed is not None or "SMCTRACK_SEED" in os.environ:
        spec = dataclasses.replace(spec, seed=_seed(args.seed))
    scenario = generate_scenario(spec)
    write_gt_csv(scenario.ground_truth, args.out_gt)
    write_detections_csv(scenario.frames, args.out_det)
    if args.out_emb:
        write_sidecar(scenario.frames, args.out_emb)
    n_det = sum(len(f.detections) for f in scenario.frames)
    print(f"wrote {len(scenario.ground_truth)} ground-truth boxes, {n_det} detections "
          f"over {spec.frames} frames (seed {spec.seed})")
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    from ..selfcheck import run_all

    failed = run_all()
    if failed:
        print(f"{failed} suite(s) failed", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def cmd_desk(args) -> int:
    from ..scenarios import desk_pipeline

    run = desk_pipeline(seed=_seed(args.seed), identities=args.identities, frames=args.frames,
                        miss_rate=args.miss_rate, sigma=args.sigma)
    print(run.metrics.to_text())
    print(f"tracks created {run.tracks_created}  seconds {run.seconds:.2f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smctrack", description="Two-stage multi-object tracker with appearance gating.")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("track", help="track a MOT-format detections file")
    t.add_argument("--det", required=True, help="detections CSV (id column -1)")
    t.add_argument("--out", required=True, help="results CSV to write")
    t.add_argument("--emb", help="embedding sidecar CSV: frame,index,d,v1..vd")
    t.add_argument("--config", help="key = value file with tracker settings")
    t.add_argument("--fusion", choices=FUSION_MODES, help="override fusion_mode")
    t.add_argument("--seed", type=int, help="seed (default: $SMCTRACK_SEED or 0)")
    t.set_defaults(func=cmd_track)

    e = sub.add_parser("eval", help="score results against ground truth")
    e.add_argument("--gt", required=True)
    e.add_argument("--res", required=True)
    e.add_argument("--iou-thresh", type=float, default=DEFAULT_IOU_THRESHOLD)
    e.add_argument("--report", help="write the metrics as CSV here (and a bar chart next to it)")
    e.add_argument("--plot", help="SVG bar chart path (default: report path with .svg)")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("synth", help="write a synthetic scenario to MOT files")
    s.add_argument("--spec", required=True, help="scenario JSON")
    s.add_argument("--out-gt", required=True)
    s.add_argument("--out-det", required=True)
    s.add_argument("--out-emb")
    s.add_argument("--seed", type=int, help="override the spec's seed")
    s.set_defaults(func=cmd_synth)

    c = sub.add_parser("selfcheck", help="run the built-in oracle suites")
    c.set_defaults(func=cmd_selfcheck)

    d = sub.add_parser("desk", help="end-to-end run: render, embed, track, evaluate")
    d.add_argument("--seed", type=int)
    d.add_argument("--identities", type=int, default=10)
    d.add_argument("--frames", type=int, default=300)
    d.add_argument("--miss-rate", type=float, default=0.05)
    d.add_argument("--sigma", type=float, default=0.05)
    d.set_defaults(func=cmd_desk)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, SmcTrackError, OSError) as exc:
        print(f"smctrack {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
