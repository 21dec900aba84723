"""Boxes, detections and frame containers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .errors import ValidationError


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned pixel box stored as top-left corner plus size."""

    left: float
    top: float
    width: float
    height: float

    def __post_init__(self):
        for name in ("left", "top", "width", "height"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"box {name} is not finite: {getattr(self, name)!r}")
        if not (self.width > 0 and self.height > 0):
            raise ValidationError(f"box must have positive size, got {self.width}x{self.height}")

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def right(self) -> float:
        return self.left + self.width

    @property
    def bottom(self) -> float:
        return self.top + self.height

    @property
    def center(self) -> tuple[float, float]:
        return self.left + self.width / 2.0, self.top + self.height / 2.0

    def translated(self, dx: float, dy: float) -> "BoundingBox":
        return BoundingBox(self.left + dx, self.top + dy, self.width, self.height)

    def to_tlwh(self) -> np.ndarray:
        return np.array([self.left, self.top, self.width, self.height], dtype=np.float64)

    @classmethod
    def from_tlwh(cls, tlwh) -> "BoundingBox":
        l, t, w, h = (float(x) for x in tlwh)
        return cls(l, t, w, h)


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    score: float
    frame: int
    embedding: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise ValidationError(f"detection score must lie in [0, 1], got {self.score!r}")
        if self.frame < 0:
            raise ValidationError(f"frame index must be non-negative, got {self.frame}")


@dataclass(frozen=True)
class FrameObservations:
    frame: int
    detections: tuple[Detection, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "detections", tuple(self.detections))
        for det in self.detections:
            if det.frame != self.frame:
                raise ValidationError(
                    f"detection of frame {det.frame} placed in frame {self.frame}"
                )

    def __len__(self):
        return len(self.detections)


def _overlap(a0: float, aw: float, b0: float, bw: float) -> float:
    # measured from a0 so identical spans give exactly their width
    d = b0 - a0
    return min(aw, d + bw) - max(0.0, d)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    if (a.left, a.top, a.width, a.height) > (b.left, b.top, b.width, b.height):
        a, b = b, a  # fixed operand order keeps the result exactly symmetric
    iw = _overlap(a.left, a.width, b.left, b.width)
    ih = _overlap(a.top, a.height, b.top, b.height)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def boxes_to_array(boxes: Sequence[BoundingBox]) -> np.ndarray:
    if len(boxes) == 0:
        return np.zeros((0, 4))
    return np.array([[b.left, b.top, b.width, b.height] for b in boxes], dtype=np.float64)


def iou_matrix(boxes_a: Sequence[BoundingBox], boxes_b: Sequence[BoundingBox]) -> np.ndarray:
    return _kernels.iou_matrix(boxes_to_array(boxes_a), boxes_to_array(boxes_b))


def iou_distance_matrix(predicted_boxes: Sequence[BoundingBox], detections: Sequence[Detection]) -> np.ndarray:
    """``1 - IoU`` between predicted track boxes (rows) and detections (cols)."""
    det_boxes = [d.box for d in detections]
    if len(predicted_boxes) == 0 or len(det_boxes) == 0:
        return np.zeros((len(predicted_boxes), len(det_boxes)))
    return 1.0 - iou_matrix(predicted_boxes, det_boxes)
