"""Axis-aligned bounding box algebra: intersection, overlap (IoU), center error."""

import math
from dataclasses import dataclass


class InvalidBoxError(ValueError):
    """Raised when a box with non-positive extent or non-finite fields is used."""


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned rectangle in pixel coordinates (x, y = top-left corner)."""

    x: float
    y: float
    w: float
    h: float

    def validate(self) -> None:
        for v in (self.x, self.y, self.w, self.h):
            if not math.isfinite(v):
                raise InvalidBoxError(f"non-finite box field in {self}")
        if self.w <= 0 or self.h <= 0:
            raise InvalidBoxError(f"non-positive extent in {self}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self):
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def aspect_ratio(self) -> float:
        return self.w / self.h

    def is_valid(self) -> bool:
        try:
            self.validate()
        except InvalidBoxError:
            return False
        return True


def intersection_area(a: BoundingBox, b: BoundingBox) -> float:
    """Area of the overlapping rectangle; 0 when the boxes are disjoint."""
    a.validate()
    b.validate()
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def overlap_score(r_t: BoundingBox, r_a: BoundingBox) -> float:
    """Intersection-over-union of two boxes, in [0, 1]."""
    inter = intersection_area(r_t, r_a)
    union = r_t.area + r_a.area - inter
    return inter / union


def center_error(r_t: BoundingBox, r_a: BoundingBox) -> float:
    """Euclidean distance between box centers, in pixels."""
    r_t.validate()
    r_a.validate()
    cx_t, cy_t = r_t.center
    cx_a, cy_a = r_a.center
    return math.hypot(cx_t - cx_a, cy_t - cy_a)
