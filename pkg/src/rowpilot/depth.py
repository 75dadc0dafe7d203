"""Depth-map perception: row-end window detection plus the obstacle check.

Depth frames are plain ``uint16`` arrays of shape ``(h, w)`` holding
millimeters in ``[0, 8000]``; ``0`` means no return from the sensor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

MAX_DEPTH_MM = 8000

# 3x3 structuring element -> 8-connectivity
_EIGHT = np.ones((3, 3), dtype=bool)


class AllInvalid(ValueError):
    """Every pixel of the depth frame is 0."""


@dataclass(frozen=True)
class ComponentBox:
    # inclusive pixel bounds
    x_min: int
    y_min: int
    x_max: int
    y_max: int

    @property
    def box_area(self) -> int:
        return (self.x_max - self.x_min + 1) * (self.y_max - self.y_min + 1)

    @property
    def center_x(self) -> float:
        return (self.x_min + self.x_max) / 2


@dataclass(frozen=True)
class Detection:
    window: ComponentBox
    center_x: float


@dataclass(frozen=True)
class DepthPipelineParams:
    t_distance: float = 0.5
    # minimum window box area in px^2; None means 1% of the frame
    t_area: float | None = None
    stop_distance: float = 500.0
    stop_fraction: float = 0.05
    stop_roi_fraction: float = 1 / 3
    # absolute floor (mm) below which nothing counts as far field; 0 disables
    min_far_depth: float = 1000.0

    def __post_init__(self):
        if not 0 < self.t_distance < 1:
            raise ValueError(f"t_distance must lie in (0, 1), got {self.t_distance}")
        if self.t_area is not None and self.t_area <= 0:
            raise ValueError("t_area must be positive")
        if self.stop_distance <= 0:
            raise ValueError("stop_distance must be positive")
        if not 0 < self.stop_fraction < 1:
            raise ValueError("stop_fraction must lie in (0, 1)")
        if not 0 < self.stop_roi_fraction <= 1:
            raise ValueError("stop_roi_fraction must lie in (0, 1]")
        if self.min_far_depth < 0:
            raise ValueError("min_far_depth must be non-negative")

    def area_threshold(self, height: int, width: int) -> float:
        if self.t_area is None:
            return 0.01 * height * width
        return float(self.t_area)


def as_depth_frame(data, width: int | None = None, height: int | None = None) -> np.ndarray:
    """Coerce *data* into a validated ``uint16`` depth frame.

    A flat sequence needs *width* and *height*; a 2-D array is taken as is.
    """
    arr = np.asarray(data)
    if arr.ndim == 1:
        if width is None or height is None:
            raise ValueError("flat depth data needs width and height")
        if arr.size != width * height:
            raise ValueError(f"expected {width * height} samples, got {arr.size}")
        arr = arr.reshape(height, width)
    if arr.ndim != 2:
        raise ValueError(f"depth frame must be 2-D, got shape {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() > MAX_DEPTH_MM):
        raise ValueError(f"depth values must lie in [0, {MAX_DEPTH_MM}]")
    return arr.astype(np.uint16, copy=False)


def normalize_depth(frame: np.ndarray) -> np.ndarray:
    """Divide the frame by its maximum so the farthest return becomes 1.0.

    Invalid (zero) pixels stay at zero. Raises :class:`AllInvalid` when the
    frame carries no return at all.
    """
    peak = frame.max(initial=0)
    if peak == 0:
        raise AllInvalid("depth frame has no valid pixel")
    return frame / np.float64(peak)


def threshold_far_field(nd: np.ndarray, t_distance: float) -> np.ndarray:
    return nd > t_distance


def extract_components(mask: np.ndarray) -> list[ComponentBox]:
    """Tight bounding boxes of the 8-connected components of *mask*."""
    labels, n = ndimage.label(mask, structure=_EIGHT)
    if n == 0:
        return []
    boxes = []
    for sl in ndimage.find_objects(labels):
        rows, cols = sl
        boxes.append(ComponentBox(cols.start, rows.start, cols.stop - 1, rows.stop - 1))
    return boxes


def select_window(boxes: list[ComponentBox], t_area: float,
                  frame_width: int | None = None) -> Detection | None:
    """Pick the largest box; ``None`` when there is none or it is below *t_area*.

    Equal areas are broken by distance of the box center to the frame
    center, then by position, so the result never depends on list order.
    """
    if not boxes:
        return None
    if frame_width is None:
        frame_width = max(b.x_max for b in boxes) + 1
    mid = frame_width / 2

    def key(b):
        return (-b.box_area, abs(b.center_x - mid), b.x_min, b.y_min, b.x_max, b.y_max)

    best = min(boxes, key=key)
    if best.box_area < t_area:
        return None
    return Detection(best, best.center_x)


def far_field_mask(frame: np.ndarray, t_distance: float,
                   min_far_depth: float = 0.0) -> np.ndarray | None:
    """Binary far-field mask of a raw frame, ``None`` for an all-invalid frame.

    Pixels closer than *min_far_depth* millimeters are never far field, so a
    uniformly near frame (a wall or glare right in front of the lens) does
    not turn into one frame-sized window.
    """
    try:
        mask = threshold_far_field(normalize_depth(frame), t_distance)
    except AllInvalid:
        return None
    if min_far_depth > 0:
        mask &= frame >= min_far_depth
    return mask


def detect_row_end(frame: np.ndarray, params: DepthPipelineParams) -> Detection | None:
    mask = far_field_mask(frame, params.t_distance, params.min_far_depth)
    if mask is None:
        return None
    h, w = frame.shape
    return select_window(extract_components(mask), params.area_threshold(h, w), w)


def obstacle_roi(width: int, roi_fraction: float) -> slice:
    """Column slice of the central band used by the obstacle check."""
    band = max(1, int(round(width * roi_fraction)))
    start = (width - band) // 2
    return slice(start, start + band)


def check_obstacle(frame: np.ndarray, params: DepthPipelineParams) -> bool:
    roi = frame[:, obstacle_roi(frame.shape[1], params.stop_roi_fraction)]
    valid = roi[roi > 0]
    # no valid return in front of the robot: stop
    if valid.size == 0:
        return True
    near = np.count_nonzero(valid < params.stop_distance)
    return near / valid.size > params.stop_fraction
