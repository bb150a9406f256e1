"""Axis-aligned bounding boxes and overlap geometry.

Boxes are integer pixel rectangles (top-left corner plus size) in the
coordinate space of the frame they were measured on.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class BoundingBox:
    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box must have positive size, got {self.w}x{self.h}")

    @property
    def x2(self) -> int:
        return self.x + self.w

    @property
    def y2(self) -> int:
        return self.y + self.h

    @property
    def area(self) -> int:
        return self.w * self.h

    def translated(self, dx: int, dy: int) -> "BoundingBox":
        return BoundingBox(self.x + dx, self.y + dy, self.w, self.h)

    def scaled(self, factor: float) -> "BoundingBox":
        """Scale all coordinates by `factor`, keeping at least 1px of size."""
        return BoundingBox(
            round(self.x * factor),
            round(self.y * factor),
            max(1, round(self.w * factor)),
            max(1, round(self.h * factor)),
        )

    def intersects_frame(self, width: int, height: int) -> bool:
        return self.x < width and self.y < height and self.x2 > 0 and self.y2 > 0


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union; 0.0 for disjoint boxes."""
    ix = min(a.x2, b.x2) - max(a.x, b.x)
    iy = min(a.y2, b.y2) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union


def clamp_into_frame(box: BoundingBox, width: int, height: int) -> BoundingBox:
    """Shift a box so its intersection with the frame stays non-empty.

    Size is preserved; only the position is clamped, so a box pushed past
    an edge keeps at least one pixel inside.
    """
    x = min(max(box.x, 1 - box.w), width - 1)
    y = min(max(box.y, 1 - box.h), height - 1)
    return BoundingBox(x, y, box.w, box.h)


def clip_to_frame(box: BoundingBox, width: int, height: int) -> BoundingBox | None:
    """Crop a box to the frame rectangle; None if nothing remains."""
    x1 = max(box.x, 0)
    y1 = max(box.y, 0)
    x2 = min(box.x2, width)
    y2 = min(box.y2, height)
    if x2 <= x1 or y2 <= y1:
        return None
    return BoundingBox(x1, y1, x2 - x1, y2 - y1)
