"""Guillotine patch stitching onto fixed-size canvases.

Patches are placed strictly in queue order. For each patch the free
rectangle with the smallest short-side leftover is chosen across every open
canvas; the patch sits at that rectangle's bottom-left corner and the rest of
the rectangle is cut in two. A new blank canvas is opened only when no free
rectangle can hold the patch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

from .geometry import Rect


class StitchError(ValueError):
    pass


@dataclass(frozen=True)
class CanvasSpec:
    width: int
    height: int
    vram_per_canvas: float = 1.0  # GB

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise StitchError(f"canvas must be at least 1x1, got {self.width}x{self.height}")
        if not self.vram_per_canvas > 0:
            raise StitchError("vram_per_canvas must be positive")

    @property
    def area(self) -> int:
        return self.width * self.height


@dataclass(frozen=True)
class Placement:
    patch_id: str
    canvas_index: int
    position: Rect


@dataclass(frozen=True)
class CanvasState:
    index: int
    placements: tuple[Placement, ...]
    free: tuple[Rect, ...]

    @property
    def used_area(self) -> int:
        return sum(p.position.area for p in self.placements)


@dataclass(frozen=True)
class StitchResult:
    spec: CanvasSpec
    canvases: tuple[CanvasState, ...]
    placement_index: dict[str, Placement] = field(compare=False, hash=False)

    def __len__(self) -> int:
        return len(self.canvases)

    @property
    def patch_ids(self) -> list[str]:
        return [p.patch_id for c in self.canvases for p in c.placements]


EMPTY_SPEC = CanvasSpec(1, 1)


def guillotine_split(free: Rect, w: int, h: int) -> list[Rect]:
    """Residual rectangles after putting a ``w x h`` patch at ``free``'s bottom-left.

    The cut runs along the axis with the shorter leftover; ties take the
    vertical cut. Zero-area pieces are dropped.
    """
    left_w = free.w - w
    left_h = free.h - h
    if left_w <= left_h:
        right = Rect(free.x + w, free.y, left_w, free.h)
        top = Rect(free.x, free.y + h, w, left_h)
    else:
        right = Rect(free.x + w, free.y, left_w, h)
        top = Rect(free.x, free.y + h, free.w, left_h)
    return [r for r in (right, top) if r.w > 0 and r.h > 0]


class Stitcher:
    """Mutable packing state; ``stitch_all`` is the pure entry point.

    Because placement depends only on the prefix of the queue, appending one
    patch to a copy of the state gives exactly what a full repack would.
    """

    def __init__(self, spec: CanvasSpec):
        self.spec = spec
        self._placements: list[list[Placement]] = []
        # (canvas_index, rect) pairs for every live free rectangle
        self._free: list[tuple[int, Rect]] = []

    def copy(self) -> Stitcher:
        other = Stitcher.__new__(Stitcher)
        other.spec = self.spec
        other._placements = [list(ps) for ps in self._placements]
        other._free = list(self._free)
        return other

    @property
    def canvas_count(self) -> int:
        return len(self._placements)

    @property
    def patch_count(self) -> int:
        return sum(len(ps) for ps in self._placements)

    def _best_free(self, w: int, h: int) -> int | None:
        best = None
        best_key = None
        for i, (ci, c) in enumerate(self._free):
            if c.w < w or c.h < h:
                continue
            key = (min(c.w - w, c.h - h), ci, c.y, c.x)
            if best_key is None or key < best_key:
                best, best_key = i, key
        return best

    def add(self, patch_id: str, w: int, h: int) -> Placement:
        if w > self.spec.width or h > self.spec.height:
            raise StitchError(
                f"patch exceeds canvas: {patch_id} is {w}x{h}, canvas {self.spec.width}x{self.spec.height}"
            )
        if w < 1 or h < 1:
            raise StitchError(f"patch {patch_id} has non-positive size {w}x{h}")
        slot = self._best_free(w, h)
        if slot is None:
            self._placements.append([])
            self._free.append((len(self._placements) - 1, Rect(0, 0, self.spec.width, self.spec.height)))
            slot = len(self._free) - 1
        ci, c = self._free.pop(slot)
        placement = Placement(patch_id, ci, Rect(c.x, c.y, w, h))
        self._placements[ci].append(placement)
        self._free.extend((ci, r) for r in guillotine_split(c, w, h))
        return placement

    def result(self) -> StitchResult:
        free_by_canvas: list[list[Rect]] = [[] for _ in self._placements]
        for ci, r in self._free:
            free_by_canvas[ci].append(r)
        canvases = tuple(
            CanvasState(i, tuple(ps), tuple(free_by_canvas[i])) for i, ps in enumerate(self._placements)
        )
        index = {p.patch_id: p for ps in self._placements for p in ps}
        return StitchResult(self.spec, canvases, index)


def stitch_all(queue: Iterable, spec: CanvasSpec) -> StitchResult:
    """Pack every patch in ``queue`` from blank canvases.

    Items need ``patch_id`` plus either ``rect`` or ``w``/``h`` attributes.
    """
    st = Stitcher(spec)
    for p in queue:
        st.add(p.patch_id, p.w, p.h)
    return st.result()


def canvas_efficiency(result: StitchResult) -> list[float]:
    s = result.spec.area
    return [c.used_area / s for c in result.canvases]


def layout_records(result: StitchResult) -> list[dict]:
    return [
        {"canvas_index": p.canvas_index, "patch_id": p.patch_id, **dict(zip("xywh", p.position.as_list()))}
        for c in result.canvases
        for p in c.placements
    ]


def dump_layout(result: StitchResult, fmt: str = "json") -> str:
    """Layout listing (canvas_index, patch_id, x, y, w, h) for external viewers."""
    rows = layout_records(result)
    if fmt == "json":
        return json.dumps(
            {"canvas": [result.spec.width, result.spec.height], "canvases": len(result), "placements": rows},
            indent=2,
        )
    if fmt == "text":
        lines = [f"# canvas={result.spec.width}x{result.spec.height} canvases={len(result)}"]
        lines.append("canvas_index\tpatch_id\tx\ty\tw\th")
        lines += [f"{r['canvas_index']}\t{r['patch_id']}\t{r['x']}\t{r['y']}\t{r['w']}\t{r['h']}" for r in rows]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown layout format: {fmt}")

