"""Proportional parabolic control law and the depth/fallback/stop arbiter."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from rowpilot.depth import DepthPipelineParams, Detection, check_obstacle, detect_row_end


class Source(str, enum.Enum):
    DEPTH = "Depth"
    FALLBACK = "Fallback"
    EMERGENCY_STOP = "EmergencyStop"


class Mode(str, enum.Enum):
    DEPTH = "DepthMode"
    FALLBACK = "FallbackMode"


class ClassifierUnavailable(RuntimeError):
    """Depth control failed and there is no view class to fall back on."""


@dataclass(frozen=True)
class ControllerParams:
    max_lin_vel: float = 1.0
    max_ang_vel: float = 1.0
    frame_width: int = 640
    fallback_engage_count: int = 3
    fallback_release_count: int = 5

    def __post_init__(self):
        if self.max_lin_vel <= 0 or self.max_ang_vel <= 0:
            raise ValueError("velocity limits must be positive")
        if self.frame_width < 2:
            raise ValueError("frame_width must be at least 2")
        if self.fallback_engage_count < 1 or self.fallback_release_count < 1:
            raise ValueError("hysteresis counts must be >= 1")


@dataclass(frozen=True)
class ControlCommand:
    linear: float
    angular: float  # rad/s, positive = counterclockwise
    source: Source

    @classmethod
    def stop(cls) -> "ControlCommand":
        return cls(0.0, 0.0, Source.EMERGENCY_STOP)


@dataclass(frozen=True)
class ArbiterState:
    consecutive_depth_failures: int = 0
    consecutive_depth_successes: int = 0
    mode: Mode = Mode.DEPTH
    # last command issued by depth control, held while a failure streak is
    # shorter than the engage count
    last_depth_command: ControlCommand | None = None


def lateral_offset(det: Detection, frame_width: int) -> float:
    return det.center_x - frame_width / 2


def _normalized_sq(d: float, frame_width: int) -> float:
    half = frame_width / 2
    return (d * d) / (half * half)


def angular_velocity(d: float, params: ControllerParams) -> float:
    mag = params.max_ang_vel * _normalized_sq(d, params.frame_width)
    return -mag if d >= 0 else mag


def linear_velocity(d: float, params: ControllerParams) -> float:
    return params.max_lin_vel * (1 - _normalized_sq(d, params.frame_width))


def depth_command(det: Detection, params: ControllerParams) -> ControlCommand:
    d = lateral_offset(det, params.frame_width)
    return ControlCommand(linear_velocity(d, params), angular_velocity(d, params), Source.DEPTH)


def arbiter_step(frame, view, state: ArbiterState, params: ControllerParams,
                 pipeline_params: DepthPipelineParams, fallback_params=None,
                 detection=...):
    """Run one control cycle and return ``(command, new_state)``.

    Priority is emergency stop, then depth control, then the discrete
    fallback driven by *view* (a ``ViewClass`` or ``None`` when no
    classifier is configured). Depth failures shorter than
    ``fallback_engage_count`` hold the last depth command; once in fallback
    mode, ``fallback_release_count`` consecutive detections are needed to
    hand control back.

    *detection* may be passed when the caller already ran
    :func:`detect_row_end` on this frame.
    """
    from rowpilot.fallback import FallbackParams, discrete_command

    if frame.shape[1] != params.frame_width:
        raise ValueError(
            f"frame width {frame.shape[1]} does not match controller width {params.frame_width}")

    if check_obstacle(frame, pipeline_params):
        return ControlCommand.stop(), replace(
            state, consecutive_depth_failures=0, consecutive_depth_successes=0)

    det = detect_row_end(frame, pipeline_params) if detection is ... else detection

    def fallback():
        if view is None:
            raise ClassifierUnavailable("depth detection failed and no classifier is configured")
        return discrete_command(view, fallback_params or FallbackParams())

    if det is not None:
        successes = state.consecutive_depth_successes + 1
        cmd = depth_command(det, params)
        if state.mode is Mode.FALLBACK and successes < params.fallback_release_count:
            return fallback(), replace(
                state, consecutive_depth_successes=successes, consecutive_depth_failures=0,
                last_depth_command=cmd)
        return cmd, ArbiterState(0, successes, Mode.DEPTH, cmd)

    failures = state.consecutive_depth_failures + 1
    if state.mode is Mode.DEPTH and failures < params.fallback_engage_count \
            and state.last_depth_command is not None:
        return state.last_depth_command, replace(
            state, consecutive_depth_failures=failures, consecutive_depth_successes=0)
    mode = Mode.FALLBACK if failures >= params.fallback_engage_count else state.mode
    return fallback(), replace(
        state, consecutive_depth_failures=failures, consecutive_depth_successes=0, mode=mode)
