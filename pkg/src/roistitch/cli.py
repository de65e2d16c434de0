"""Command-line entry point: ``roistitch <command> ...``.

Exit codes: 0 success, 1 runtime error, 2 configuration error.
"""

from __future__ import annotations

import argparse
import itertools
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import report
from .config import ConfigError, ExperimentConfig, load_config, with_overrides
from .geometry import Rect
from .latency import profile_from_samples, save_profile
from .partition import FrameSpec, PartitionConfig, partition
from .sim import POLICIES, SimConfig, run
from .stitcher import CanvasSpec, dump_layout, stitch_all
from .workload import WorkloadGenConfig, generate_trace, load_trace, retime, save_trace, substream

log = logging.getLogger("roistitch")

EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _dims(text: str) -> tuple[int, int]:
    try:
        a, b = text.lower().split("x")
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _words(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if getattr(args, "out", None):
        cfg = replace(cfg, out_dir=Path(args.out))
    sim_changes = {"seed": args.seed, "policy": getattr(args, "policy", None)}
    return with_overrides(cfg, **sim_changes)


def cmd_simulate(args) -> int:
    cfg = _load(args)
    if args.slo_ms is not None or args.bandwidth is not None:
        link = cfg.sim.link if args.bandwidth is None else replace(cfg.sim.link, bandwidth_mbps=args.bandwidth)
        cfg = with_overrides(cfg, slo_ms=args.slo_ms, link=link)
    scenes = cfg.load_scenes()
    metrics = run(scenes, cfg.sim)
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    summary = metrics.summary()
    report.write_summary(out / "summary.csv", [summary])
    if cfg.write_patches:
        report.write_patches(out / "patches.csv", metrics)
    if cfg.write_invocations:
        report.write_invocations(out / "invocations.csv", metrics)
    if cfg.write_events:
        report.write_events(out / "events.jsonl", metrics.events)
    print(report.summary_line(summary))
    return 0


SWEEP_AXES = ["slo_ms", "bandwidth_mbps", "fps", "policy"]


def _run_cell(scenes, sim: SimConfig, cell: dict, retime_fps: bool) -> dict:
    row = {**cell, "status": "ok", "error": ""}
    try:
        if retime_fps:
            scenes = [retime(s, cell["fps"]) for s in scenes]
        sim = replace(
            sim,
            slo_ms=cell["slo_ms"],
            policy=cell["policy"],
            link=replace(sim.link, bandwidth_mbps=cell["bandwidth_mbps"]),
        )
        row.update(run(scenes, sim).summary())
    except ValueError as exc:
        row.update(status="error", error=str(exc), policy=cell["policy"])
    return row


def cmd_sweep(args) -> int:
    cfg = _load(args)
    fps_axis = args.fps or cfg.sweep.get("fps")
    axes = {
        "slo_ms": args.slo_ms or cfg.sweep.get("slo_ms") or [cfg.sim.slo_ms],
        "bandwidth_mbps": args.bandwidth or cfg.sweep.get("bandwidth_mbps") or [cfg.sim.link.bandwidth_mbps],
        "fps": fps_axis or [cfg.trace_fps],
        "policy": args.policies or cfg.sweep.get("policy") or [cfg.sim.policy],
    }
    cells = [dict(zip(SWEEP_AXES, combo)) for combo in itertools.product(*(axes[a] for a in SWEEP_AXES))]
    # an fps axis retimes the raw trace, replacing any replay rate set in the config
    scenes = replace(cfg, trace_fps=None).load_scenes() if fps_axis else cfg.load_scenes()
    retime_fps = itertools.repeat(bool(fps_axis))
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(_run_cell, itertools.repeat(scenes), itertools.repeat(cfg.sim), cells, retime_fps))
    else:
        rows = [_run_cell(scenes, cfg.sim, c, r) for c, r in zip(cells, retime_fps)]
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.out_dir / "sweep.csv"
    report.write_summary(path, rows, extra=["slo_ms", "bandwidth_mbps", "fps", "status", "error"])
    failed = sum(r["status"] != "ok" for r in rows)
    print(f"sweep: {len(rows)} cells, {failed} failed -> {path}")
    return 0


def cmd_gen_trace(args) -> int:
    scenes = []
    for i in range(args.scenes):
        gen = WorkloadGenConfig(
            seed=args.seed if args.seed is not None else 0,
            n_frames=args.frames,
            fps=args.fps,
            width=args.size[0],
            height=args.size[1],
            scene_id=f"scene{i}",
            roi_proportion_mean=args.roi_mean,
            roi_proportion_jitter=args.roi_jitter,
            burst_probability=args.burst_probability,
            burst_multiplier=args.burst_multiplier,
            roi_count_range=tuple(args.roi_count),
        )
        scenes.append(generate_trace(gen))
    save_trace(scenes, args.out)
    frames = sum(len(s.frames) for s in scenes)
    print(f"wrote {frames} frames in {len(scenes)} scene(s) to {args.out}")
    return 0


def cmd_gen_profile(args) -> int:
    rng = substream(args.seed if args.seed is not None else 0, "profile")
    samples = {}
    for k in range(1, args.max_k + 1):
        mu = args.mu_base + args.mu_per_canvas * k
        sigma = args.sigma_base + args.sigma_per_canvas * k
        if sigma == 0:
            samples[k] = [mu] * args.iterations
            continue
        xs = rng.normal(mu, sigma, size=args.iterations)
        while (xs <= 0).any():
            bad = xs <= 0
            xs[bad] = rng.normal(mu, sigma, size=int(bad.sum()))
        samples[k] = xs.tolist()
    profile = profile_from_samples(samples, canvas=args.canvas)
    save_profile(profile, args.out)
    print(f"wrote profile for k=1..{args.max_k} to {args.out}")
    return 0


def cmd_dump_packing(args) -> int:
    spec = CanvasSpec(*args.canvas)
    if args.trace:
        scenes = load_trace(args.trace)
        scene = next((s for s in scenes if args.scene is None or s.scene_id == args.scene), None)
        if scene is None:
            raise ConfigError(f"scene {args.scene} not in {args.trace}")
        frame = next((f for f in scene.frames if f.frame == args.frame), None)
        if frame is None:
            raise ConfigError(f"frame {args.frame} not in scene {scene.scene_id}")
        fs = FrameSpec(f"{scene.scene_id}:{frame.frame}", scene.width, scene.height, frame.t_ms, 1.0)
        queue = partition(fs, PartitionConfig(*args.zones), frame.rois)
    else:
        if not args.patch:
            raise ConfigError("give --patch WxH (repeatable) or --trace/--frame")
        queue = [_Patch(f"p{i}", Rect(0, 0, w, h)) for i, (w, h) in enumerate(args.patch)]
    text = dump_layout(stitch_all(queue, spec), args.format)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    return 0


class _Patch:
    def __init__(self, patch_id: str, rect: Rect):
        self.patch_id = patch_id
        self.rect = rect
        self.w, self.h = rect.w, rect.h


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="roistitch", description="SLO-aware patch stitching and batching simulator")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one simulation from a config file")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--policy", choices=POLICIES)
    p.add_argument("--slo-ms", type=float)
    p.add_argument("--bandwidth", type=float, help="uplink Mbps")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="cartesian sweep over SLO x bandwidth x fps x policy")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--slo-ms", type=_floats, help="comma-separated list")
    p.add_argument("--bandwidth", type=_floats, help="comma-separated Mbps list")
    p.add_argument("--fps", type=_floats, help="comma-separated replay rates")
    p.add_argument("--policies", type=_words, help="comma-separated policy list")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen-trace", help="write a synthetic RoI trace (JSON lines)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--frames", type=int, default=600)
    p.add_argument("--fps", type=float, default=2.0)
    p.add_argument("--size", type=_dims, default=(3840, 2160))
    p.add_argument("--scenes", type=int, default=1)
    p.add_argument("--roi-mean", type=float, default=0.05)
    p.add_argument("--roi-jitter", type=float, default=0.3)
    p.add_argument("--burst-probability", type=float, default=0.05)
    p.add_argument("--burst-multiplier", type=float, default=2.0)
    p.add_argument("--roi-count", type=int, nargs=2, default=(0, 5000), metavar=("MIN", "MAX"))
    p.set_defaults(func=cmd_gen_trace)

    p = sub.add_parser("gen-profile", help="profile a synthetic linear latency law")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--canvas", type=_dims, default=(1024, 1024))
    p.add_argument("--max-k", type=int, default=16)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--mu-base", type=float, default=30.0)
    p.add_argument("--mu-per-canvas", type=float, default=18.0)
    p.add_argument("--sigma-base", type=float, default=1.5)
    p.add_argument("--sigma-per-canvas", type=float, default=0.5)
    p.set_defaults(func=cmd_gen_profile)

    p = sub.add_parser("dump-packing", help="print the canvas layout for a set of patches")
    p.add_argument("--canvas", type=_dims, default=(1024, 1024))
    p.add_argument("--patch", type=_dims, action="append", help="WxH, repeatable, packed in order")
    p.add_argument("--trace")
    p.add_argument("--scene")
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--zones", type=_dims, default=(4, 4))
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_dump_packing)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
