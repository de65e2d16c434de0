"""Synthetic RoI traces and the JSON-lines trace format.

A trace line describes one frame::

    {"scene": "s0", "frame": 3, "t_ms": 1500.0, "W": 3840, "H": 2160,
     "rois": [[x, y, w, h], ...]}

Generated scenes mimic crowd footage from a fixed high-resolution camera:
RoIs gather around a few slowly drifting groups, the RoI share of each frame
wanders smoothly around its mean, and irregular bursts multiply it.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .geometry import Rect


class TraceError(ValueError):
    pass


def substream(seed: int, component: str) -> np.random.Generator:
    """Independent RNG for one named component, derived from the top-level seed."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(component.encode())]))


@dataclass(frozen=True)
class TraceFrame:
    frame: int
    t_ms: float
    rois: tuple[Rect, ...]


@dataclass(frozen=True)
class TraceScene:
    scene_id: str
    width: int
    height: int
    fps: float
    frames: tuple[TraceFrame, ...]

    def __post_init__(self):
        ts = [f.t_ms for f in self.frames]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise TraceError(f"scene {self.scene_id}: frame times must be strictly increasing")
        frame_rect = Rect(0, 0, self.width, self.height)
        for f in self.frames:
            for r in f.rois:
                if r.w < 1 or r.h < 1 or not frame_rect.contains(r):
                    raise TraceError(f"scene {self.scene_id} frame {f.frame}: roi {r.as_list()} outside frame")

    def roi_proportions(self) -> np.ndarray:
        s = self.width * self.height
        return np.array([sum(r.area for r in f.rois) / s for f in self.frames])


@dataclass(frozen=True)
class WorkloadGenConfig:
    seed: int = 0
    n_frames: int = 600
    fps: float = 2.0
    width: int = 3840
    height: int = 2160
    scene_id: str = "scene0"
    roi_proportion_mean: float = 0.05
    roi_proportion_jitter: float = 0.3
    burst_probability: float = 0.05
    burst_multiplier: float = 2.0
    roi_count_range: tuple[int, int] = (0, 5000)
    roi_aspect_range: tuple[float, float] = (0.3, 0.5)  # width / height
    roi_height_range: tuple[int, int] = (32, 128)
    groups: int = 6
    group_spread: float = 0.07  # fraction of frame size
    drift: float = 0.004  # fraction of frame size per frame

    def __post_init__(self):
        if not 0 < self.roi_proportion_mean < 1:
            raise TraceError("roi_proportion_mean must be in (0, 1)")
        if not 0 <= self.roi_proportion_jitter < 1:
            raise TraceError("roi_proportion_jitter must be in [0, 1)")
        if not 0 <= self.burst_probability < 1:
            raise TraceError("burst_probability must be in [0, 1)")
        if self.burst_multiplier < 1:
            raise TraceError("burst_multiplier must be >= 1")
        if self.n_frames < 0 or not self.fps > 0:
            raise TraceError("n_frames must be >= 0 and fps positive")
        lo, hi = self.roi_count_range
        if not 0 <= lo <= hi:
            raise TraceError(f"bad roi_count_range {self.roi_count_range}")
        a0, a1 = self.roi_aspect_range
        h0, h1 = self.roi_height_range
        if not (0 < a0 <= a1 and 1 <= h0 <= h1):
            raise TraceError("bad roi aspect/height ranges")
        if h1 > self.height or max(1, round(h1 * a1)) > self.width:
            raise TraceError("infeasible geometry: largest roi does not fit in the frame")
        if hi > self.width * self.height:
            raise TraceError("infeasible geometry: more rois requested than frame pixels")
        if self.groups < 1:
            raise TraceError("groups must be >= 1")


def _proportions(cfg: WorkloadGenConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    n = cfg.n_frames
    phi = 0.9
    eps = rng.standard_normal(n)
    z = np.empty(n)
    for i in range(n):
        z[i] = eps[0] if i == 0 else phi * z[i - 1] + np.sqrt(1 - phi**2) * eps[i]
    bursts = rng.random(n) < cfg.burst_probability
    base = cfg.roi_proportion_mean / (1 + cfg.burst_probability * (cfg.burst_multiplier - 1))
    p = base * np.clip(1 + cfg.roi_proportion_jitter * z, 0.1, None)
    p = np.where(bursts, p * cfg.burst_multiplier, p)
    return np.clip(p, 0, 0.95), bursts


def _roi_sizes(cfg: WorkloadGenConfig, rng: np.random.Generator, target_area: float) -> np.ndarray:
    lo, hi = cfg.roi_count_range
    h0, h1 = cfg.roi_height_range
    a0, a1 = cfg.roi_aspect_range
    mean_area = (h1**3 - h0**3) / (3 * max(h1 - h0, 1e-9)) * (a0 + a1) / 2 if h1 > h0 else h0 * h0 * (a0 + a1) / 2
    guess = int(target_area / mean_area * 1.3) + 8
    n_draw = min(hi, max(lo, guess))
    hs = rng.integers(h0, h1 + 1, size=n_draw)
    ws = np.maximum(1, np.rint(hs * rng.uniform(a0, a1, size=n_draw))).astype(np.int64)
    cum = np.cumsum(ws * hs)
    n = int(np.searchsorted(cum, target_area) + 1) if target_area > 0 else 0
    n = min(max(n, lo), n_draw)
    return np.stack([ws[:n], hs[:n]], axis=1)


def generate_trace(cfg: WorkloadGenConfig) -> TraceScene:
    """Deterministic synthetic scene for a given config (seeded)."""
    rng = substream(cfg.seed, f"trace/{cfg.scene_id}")
    W, H = cfg.width, cfg.height
    props, _ = _proportions(cfg, rng)
    centers = rng.uniform([0, 0], [W, H], size=(cfg.groups, 2))
    velocity = rng.normal(0, cfg.drift, size=(cfg.groups, 2)) * [W, H]
    weights = rng.dirichlet(np.ones(cfg.groups))
    spread = np.array([W, H]) * cfg.group_spread
    frames = []
    for i in range(cfg.n_frames):
        sizes = _roi_sizes(cfg, rng, props[i] * W * H)
        n = len(sizes)
        if n:
            g = rng.choice(cfg.groups, size=n, p=weights)
            pos = centers[g] + rng.normal(0, 1, size=(n, 2)) * spread
            xs = np.clip(np.rint(pos[:, 0] - sizes[:, 0] / 2), 0, W - sizes[:, 0]).astype(np.int64)
            ys = np.clip(np.rint(pos[:, 1] - sizes[:, 1] / 2), 0, H - sizes[:, 1]).astype(np.int64)
            rois = tuple(Rect(int(x), int(y), int(w), int(h)) for x, y, (w, h) in zip(xs, ys, sizes))
        else:
            rois = ()
        frames.append(TraceFrame(i, round(i * 1000 / cfg.fps, 3), rois))
        centers = centers + velocity
        # bounce off the frame edges
        for axis, lim in ((0, W), (1, H)):
            out = (centers[:, axis] < 0) | (centers[:, axis] > lim)
            velocity[out, axis] *= -1
            centers[:, axis] = np.clip(centers[:, axis], 0, lim)
    return TraceScene(cfg.scene_id, W, H, cfg.fps, tuple(frames))


def frame_record(scene: TraceScene, f: TraceFrame) -> dict:
    return {
        "scene": scene.scene_id,
        "frame": f.frame,
        "t_ms": f.t_ms,
        "W": scene.width,
        "H": scene.height,
        "rois": [r.as_list() for r in f.rois],
    }


def dumps_trace(scenes: TraceScene | Iterable[TraceScene]) -> str:
    if isinstance(scenes, TraceScene):
        scenes = [scenes]
    lines = []
    for s in scenes:
        for f in s.frames:
            rec = frame_record(s, f)
            rec["fps"] = s.fps
            lines.append(json.dumps(rec, separators=(",", ":")))
    return "\n".join(lines) + ("\n" if lines else "")


def loads_trace(text: str) -> list[TraceScene]:
    by_scene: dict[str, dict] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            scene = str(rec["scene"])
            W, H = int(rec["W"]), int(rec["H"])
            frame = TraceFrame(int(rec["frame"]), float(rec["t_ms"]), tuple(Rect(*map(int, r)) for r in rec["rois"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise TraceError(f"trace line {lineno}: {exc!r}") from exc
        entry = by_scene.setdefault(scene, {"W": W, "H": H, "fps": float(rec.get("fps", 0) or 0), "frames": []})
        if (entry["W"], entry["H"]) != (W, H):
            raise TraceError(f"trace line {lineno}: scene {scene} changes frame size")
        entry["frames"].append(frame)
    return [TraceScene(sid, e["W"], e["H"], e["fps"], tuple(e["frames"])) for sid, e in by_scene.items()]


def save_trace(scenes, path: str | Path) -> None:
    Path(path).write_text(dumps_trace(scenes), encoding="utf-8")


def load_trace(path: str | Path) -> list[TraceScene]:
    return loads_trace(Path(path).read_text(encoding="utf-8"))


def retime(scene: TraceScene, fps: float) -> TraceScene:
    """Same frames and RoIs replayed at a different frame rate."""
    if not fps > 0:
        raise TraceError("fps must be positive")
    frames = tuple(TraceFrame(f.frame, round(i * 1000 / fps, 3), f.rois) for i, f in enumerate(scene.frames))
    return TraceScene(scene.scene_id, scene.width, scene.height, fps, frames)
