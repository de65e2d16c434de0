"""Integer rectangle arithmetic.

Coordinates use a bottom-left origin: ``x`` grows rightward and ``y`` grows
upward. Everything is measured in whole pixels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable


class GeometryError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Rect:
    x: int
    y: int
    w: int
    h: int

    @property
    def right(self) -> int:
        return self.x + self.w

    @property
    def top(self) -> int:
        return self.y + self.h

    @property
    def area(self) -> int:
        return self.w * self.h

    def contains(self, other: Rect) -> bool:
        return (
            self.x <= other.x
            and self.y <= other.y
            and other.right <= self.right
            and other.top <= self.top
        )

    def as_list(self) -> list[int]:
        return [self.x, self.y, self.w, self.h]


def area(r: Rect) -> int:
    return r.w * r.h


def overlap_area(a: Rect, b: Rect) -> int:
    dx = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    if dx <= 0:
        return 0
    dy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if dy <= 0:
        return 0
    return dx * dy


def enclosing_rect(rects: Iterable[Rect]) -> Rect:
    """Smallest axis-aligned rectangle that covers every rect in ``rects``."""
    rects = list(rects)
    if not rects:
        raise GeometryError("empty rect set")
    x0 = min(r.x for r in rects)
    y0 = min(r.y for r in rects)
    x1 = max(r.x + r.w for r in rects)
    y1 = max(r.y + r.h for r in rects)
    return Rect(x0, y0, x1 - x0, y1 - y0)
