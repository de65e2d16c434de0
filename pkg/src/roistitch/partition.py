"""Adaptive frame partitioning: RoIs -> zone-aligned patches."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .geometry import Rect, enclosing_rect


class PartitionError(ValueError):
    pass


@dataclass(frozen=True)
class FrameSpec:
    frame_id: str
    width: int
    height: int
    generation_time: float  # ms
    slo: float  # ms

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise PartitionError(f"frame {self.frame_id}: non-positive size {self.width}x{self.height}")
        if not self.slo > 0:
            raise PartitionError(f"frame {self.frame_id}: slo must be positive, got {self.slo}")


@dataclass(frozen=True)
class PartitionConfig:
    zones_x: int
    zones_y: int

    def __post_init__(self):
        if self.zones_x < 1 or self.zones_y < 1:
            raise PartitionError(f"zone grid must be at least 1x1, got {self.zones_x}x{self.zones_y}")


@dataclass(frozen=True)
class PatchMeta:
    patch_id: str
    source_frame_id: str
    rect: Rect
    generation_time: float  # ms
    slo: float  # ms
    size_bytes: int

    @property
    def deadline(self) -> float:
        return self.generation_time + self.slo

    @property
    def w(self) -> int:
        return self.rect.w

    @property
    def h(self) -> int:
        return self.rect.h


def patch_bytes(pixels: int, bytes_per_pixel: float | Fraction) -> int:
    # decimal string round-trip keeps e.g. 0.15 exact so ceil() does not overshoot
    bpp = bytes_per_pixel if isinstance(bytes_per_pixel, Fraction) else Fraction(str(bytes_per_pixel))
    return math.ceil(pixels * bpp)


def _splits(length: int, parts: int) -> list[tuple[int, int]]:
    base = length // parts
    out = [(i * base, base) for i in range(parts - 1)]
    out.append(((parts - 1) * base, length - (parts - 1) * base))
    return out


def make_zones(frame: FrameSpec, cfg: PartitionConfig) -> list[Rect]:
    """Tile the frame into ``X*Y`` zones in row-major order (bottom row first).

    When the frame size is not divisible by the grid, the last column and the
    last row absorb the remainder.
    """
    if cfg.zones_x > frame.width or cfg.zones_y > frame.height:
        raise PartitionError("zone grid finer than frame")
    cols = _splits(frame.width, cfg.zones_x)
    rows = _splits(frame.height, cfg.zones_y)
    return [Rect(x, y, w, h) for (y, h) in rows for (x, w) in cols]


def _as_array(rects: Sequence[Rect]) -> np.ndarray:
    return np.array([(r.x, r.y, r.x + r.w, r.y + r.h) for r in rects], dtype=np.int64).reshape(-1, 4)


def assign_rois(rois: Sequence[Rect], zones: Sequence[Rect]) -> list[list[Rect]]:
    """Give each RoI to the zone it overlaps most.

    Ties go to the lowest zone index. Returns one list per zone, preserving the
    input order of the RoIs.
    """
    lists: list[list[Rect]] = [[] for _ in zones]
    if not rois:
        return lists
    b = _as_array(rois)[:, None, :]
    z = _as_array(zones)[None, :, :]
    dx = np.clip(np.minimum(b[..., 2], z[..., 2]) - np.maximum(b[..., 0], z[..., 0]), 0, None)
    dy = np.clip(np.minimum(b[..., 3], z[..., 3]) - np.maximum(b[..., 1], z[..., 1]), 0, None)
    overlap = dx * dy
    # argmax returns the first maximum, which is the row-major tie-break
    best = overlap.argmax(axis=1)
    best_area = overlap[np.arange(len(rois)), best]
    for i, (zone_idx, ov) in enumerate(zip(best.tolist(), best_area.tolist())):
        if ov <= 0:
            raise PartitionError(f"roi outside frame: {rois[i]}")
        lists[zone_idx].append(rois[i])
    return lists


def partition(
    frame: FrameSpec,
    cfg: PartitionConfig,
    rois: Sequence[Rect],
    bytes_per_pixel: float | Fraction = 1,
) -> list[PatchMeta]:
    """Cut one patch per non-empty zone, sized to the enclosing rectangle of its RoIs.

    Patches may spill over their zone's border and may overlap each other;
    overlapping pixels are transmitted twice.
    """
    for r in rois:
        if r.w < 1 or r.h < 1:
            raise PartitionError(f"roi with non-positive size: {r}")
    zones = make_zones(frame, cfg)
    per_zone = assign_rois(rois, zones)
    patches = []
    for idx, members in enumerate(per_zone):
        if not members:
            continue
        rect = enclosing_rect(members)
        patches.append(
            PatchMeta(
                patch_id=f"{frame.frame_id}/z{idx}",
                source_frame_id=frame.frame_id,
                rect=rect,
                generation_time=frame.generation_time,
                slo=frame.slo,
                size_bytes=patch_bytes(rect.area, bytes_per_pixel),
            )
        )
    return patches
