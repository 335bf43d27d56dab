"""Box and detection primitives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_BOX_SIDE = 1.0


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in top-left / width / height pixel form."""

    x: float
    y: float
    w: float
    h: float

    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2, self.y + self.h / 2)

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def diagonal(self) -> float:
        return float(np.hypot(self.w, self.h))

    def clamped(self, min_side: float = MIN_BOX_SIDE) -> BoundingBox:
        """Return a copy whose width and height are at least ``min_side``."""
        if self.w >= min_side and self.h >= min_side:
            return self
        return BoundingBox(self.x, self.y, max(self.w, min_side), max(self.h, min_side))


@dataclass(frozen=True)
class Detection:
    """One box in one frame.

    Detector output leaves ``track_id`` at -1; ground-truth and tracker
    result rows carry their identity there.
    """

    frame: int
    box: BoundingBox
    confidence: float = 1.0
    track_id: int = -1


def iou(a: BoundingBox, b: BoundingBox) -> float:
    # areas from corner differences so that iou(a, a) == 1.0 exactly
    ax2, ay2, bx2, by2 = a.x + a.w, a.y + a.h, b.x + b.w, b.y + b.h
    ix = min(ax2, bx2) - max(a.x, b.x)
    iy = min(ay2, by2) - max(a.y, b.y)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union = (ax2 - a.x) * (ay2 - a.y) + (bx2 - b.x) * (by2 - b.y) - inter
    return min(inter / union, 1.0)


def iou_matrix(boxes_a: np.ndarray, boxes_b: np.ndarray) -> np.ndarray:
    """Pairwise IoU for (N, 4) and (M, 4) arrays of x, y, w, h rows."""
    a = np.asarray(boxes_a, dtype=float).reshape(-1, 4)
    b = np.asarray(boxes_b, dtype=float).reshape(-1, 4)
    ax2 = a[:, 0] + a[:, 2]
    ay2 = a[:, 1] + a[:, 3]
    bx2 = b[:, 0] + b[:, 2]
    by2 = b[:, 1] + b[:, 3]
    iw = np.minimum(ax2[:, None], bx2[None, :]) - np.maximum(a[:, 0][:, None], b[:, 0][None, :])
    ih = np.minimum(ay2[:, None], by2[None, :]) - np.maximum(a[:, 1][:, None], b[:, 1][None, :])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    area_a = (ax2 - a[:, 0]) * (ay2 - a[:, 1])
    area_b = (bx2 - b[:, 0]) * (by2 - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=inter > 0)
    return np.minimum(out, 1.0)


def box_to_measurement(b: BoundingBox) -> np.ndarray:
    return np.array([b.x + b.w / 2, b.y + b.h / 2, b.w, b.h], dtype=float)


def measurement_to_box(z) -> BoundingBox:
    cx, cy, w, h = (float(v) for v in z)
    return BoundingBox(cx - w / 2, cy - h / 2, w, h)


def boxes_array(boxes) -> np.ndarray:
    return np.array([[b.x, b.y, b.w, b.h] for b in boxes], dtype=float).reshape(-1, 4)
