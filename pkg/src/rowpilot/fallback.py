"""Three-class backup controller.

The view classes say where the robot is *pointing*: ``LEFT`` means the
camera looks at the left row wall, so the row end shows up on the right of
the image and the robot has to steer right (negative angular velocity).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from rowpilot.control import ControlCommand, Source
from rowpilot.depth import Detection

# center_band is expressed in pixels of a frame this wide and rescaled
REFERENCE_WIDTH = 640


class ViewClass(str, enum.Enum):
    LEFT = "Left"
    CENTER = "Center"
    RIGHT = "Right"


class ModelUnavailable(RuntimeError):
    pass


class OutsideCorridor(ValueError):
    pass


class NoFarField(ValueError):
    pass


@dataclass(frozen=True)
class FallbackParams:
    turn_ang_vel: float = 0.6
    turn_lin_vel: float = 0.2
    center_lin_vel: float = 0.5
    center_band: float = 100.0
    oracle_center_half_angle: float = math.radians(15)

    def __post_init__(self):
        for name in ("turn_ang_vel", "turn_lin_vel", "center_lin_vel", "center_band",
                     "oracle_center_half_angle"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.turn_lin_vel > self.center_lin_vel:
            raise ValueError("turn_lin_vel must not exceed center_lin_vel")

    def band_px(self, width: int) -> float:
        return self.center_band * width / REFERENCE_WIDTH


class Classifier(Protocol):
    """Anything that maps a preprocessed ``(rh, rw, 3)`` image to a view class.

    Implementations must be deterministic and safe to call from the control
    loop; raise :class:`ModelUnavailable` when no prediction can be made.
    """

    input_size: tuple[int, int]

    def classify(self, x: np.ndarray) -> tuple[ViewClass, float]: ...


def preprocess_frame(frame: np.ndarray, rh: int = 224, rw: int = 224) -> np.ndarray:
    """Bilinear resize of an ``(h, w, 3)`` uint8 frame to ``(rh, rw, 3)`` in [0, 1].

    Sampling uses pixel centers (``src = (dst + 0.5) * scale - 0.5``) with
    edge clamping.
    """
    if frame.ndim != 3 or frame.shape[2] != 3 or frame.shape[0] == 0 or frame.shape[1] == 0:
        raise ValueError(f"expected a nonempty (h, w, 3) frame, got {frame.shape}")
    h, w = frame.shape[:2]
    img = frame.astype(np.float64) / 255.0

    def axis(n_out, n_in):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0, n_in - 1)
        lo = np.floor(src).astype(int)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, src - lo

    y0, y1, fy = axis(rh, h)
    x0, x1, fx = axis(rw, w)
    fx = fx[None, :, None]
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    fy = fy[:, None, None]
    return top * (1 - fy) + bot * fy


def classify_frame(classifier: Classifier, frame: np.ndarray) -> tuple[ViewClass, float]:
    rh, rw = classifier.input_size
    return classifier.classify(preprocess_frame(frame, rh, rw))


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2 * math.pi)
    if a <= 0:
        a += 2 * math.pi
    return a - math.pi


def oracle_classify(pose, world, params: FallbackParams) -> ViewClass:
    """Ground-truth view class from the robot heading relative to the row axis."""
    if not (0 <= pose.x <= world.row_length and abs(pose.y) < world.row_spacing / 2):
        raise OutsideCorridor(f"pose ({pose.x:.3f}, {pose.y:.3f}) is outside the corridor")
    psi = wrap_angle(pose.theta)
    if abs(psi) <= params.oracle_center_half_angle:
        return ViewClass.CENTER
    return ViewClass.LEFT if psi > 0 else ViewClass.RIGHT


def classify_offset(offset: float, band: float) -> ViewClass:
    """Map a signed image offset of the row end to the view class.

    Row end right of center (positive) means the robot points left.
    """
    if abs(offset) <= band:
        return ViewClass.CENTER
    return ViewClass.LEFT if offset > 0 else ViewClass.RIGHT


def heuristic_classify(mask: np.ndarray,
                       params: FallbackParams = FallbackParams()) -> tuple[ViewClass, float]:
    """Classify from the column centroid of the far-field bits of *mask*."""
    if mask.size == 0:
        raise ValueError("empty mask")
    cols = np.nonzero(mask)[1]
    if cols.size == 0:
        raise NoFarField("mask has no far-field pixel")
    w = mask.shape[1]
    offset = cols.mean() - (w - 1) / 2
    view = classify_offset(offset, params.band_px(w))
    score = min(1.0, float(abs(offset)) / (w / 2))
    return view, (1.0 - score if view is ViewClass.CENTER else score)


def discrete_command(view: ViewClass, params: FallbackParams = FallbackParams()) -> ControlCommand:
    if view is ViewClass.CENTER:
        return ControlCommand(params.center_lin_vel, 0.0, Source.FALLBACK)
    if view is ViewClass.LEFT:
        return ControlCommand(params.turn_lin_vel, -params.turn_ang_vel, Source.FALLBACK)
    return ControlCommand(params.turn_lin_vel, params.turn_ang_vel, Source.FALLBACK)


def grayscale(frame: np.ndarray) -> np.ndarray:
    return frame.astype(np.float64).mean(axis=2)


def sharpness_score(frame: np.ndarray) -> float:
    """Variance of the 4-neighbour Laplacian of the mean-gray image.

    Borders are reflected without repeating the edge pixel.
    """
    g = grayscale(frame)
    if g.shape[0] < 3 or g.shape[1] < 3:
        raise ValueError("sharpness needs at least a 3x3 frame")
    p = np.pad(g, 1, mode="reflect")
    lap = p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:] - 4 * g
    return float(lap.var())


@dataclass
class LabeledSample:
    path: str
    label: ViewClass
    offset_d: float
    sharpness: float
    timestamp: float
    frame: np.ndarray | None = field(default=None, repr=False, compare=False)
    # position of the selected frame inside its window
    index: int = field(default=0, compare=False)


def label_harvest(window: Sequence[tuple[Detection | None, np.ndarray, float]],
                  params: FallbackParams, frame_width: int) -> LabeledSample | None:
    """Label the sharpest frame of a window of ``(detection, rgb, timestamp)``.

    Returns ``None`` when depth detection failed on the selected frame.
    """
    if not window:
        return None
    scores = [sharpness_score(rgb) for _, rgb, _ in window]
    best = int(np.argmax(scores))
    det, rgb, ts = window[best]
    if det is None:
        return None
    d = det.center_x - frame_width / 2
    return LabeledSample("", classify_offset(d, params.band_px(frame_width)), d,
                         scores[best], ts, frame=rgb, index=best)


class LabelHarvester:
    """Buffers frames and emits one labeled sample per full window."""

    def __init__(self, params: FallbackParams, frame_width: int, window: int = 6):
        self.params = params
        self.frame_width = frame_width
        self.window = window
        self._buf: list = []

    def push(self, det: Detection | None, rgb: np.ndarray, timestamp: float) -> LabeledSample | None:
        self._buf.append((det, rgb, timestamp))
        if len(self._buf) < self.window:
            return None
        buf, self._buf = self._buf, []
        return label_harvest(buf, self.params, self.frame_width)
