"""Synthetic vineyard corridor with a pinhole depth renderer and a closed-loop runner.

World frame: ``x`` runs along the row (the row starts at ``x = 0`` and its
open end is at ``x = row_length``), ``y`` points left with ``0`` on the
centerline, ``z`` points up. Headings are counterclockwise from ``+x``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from rowpilot.control import (
    ArbiterState, ClassifierUnavailable, ControlCommand, ControllerParams, Source,
    arbiter_step, lateral_offset,
)
from rowpilot.depth import MAX_DEPTH_MM, DepthPipelineParams, check_obstacle, detect_row_end, far_field_mask
from rowpilot.fallback import (
    FallbackParams, LabelHarvester, LabeledSample, NoFarField, OutsideCorridor, ViewClass,
    classify_frame, heuristic_classify, oracle_classify, wrap_angle,
)


@dataclass(frozen=True)
class Hole:
    side: str  # "left" or "right"
    start: float
    length: float
    height: float


@dataclass(frozen=True)
class Obstacle:
    x: float
    lateral: float
    radius: float
    height: float = 1.0


@dataclass(frozen=True)
class WorldConfig:
    row_length: float = 30.0
    row_spacing: float = 2.5
    wall_height: float = 2.0
    holes: tuple[Hole, ...] = ()
    obstacles: tuple[Obstacle, ...] = ()
    ground_plane: bool = True
    # closes the row with a frontal wall at x = row_length
    end_wall: bool = False

    def __post_init__(self):
        if self.row_spacing <= 0 or self.row_length <= 0 or self.wall_height <= 0:
            raise ValueError("corridor dimensions must be positive")
        for h in self.holes:
            if h.side not in ("left", "right"):
                raise ValueError(f"hole side must be 'left' or 'right', got {h.side!r}")
            if h.start < 0 or h.start + h.length > self.row_length or h.length <= 0:
                raise ValueError("hole must lie within the row")
        for o in self.obstacles:
            if abs(o.lateral) >= self.row_spacing / 2 or o.radius <= 0:
                raise ValueError("obstacle must lie inside the corridor")


@dataclass(frozen=True)
class Pose:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(self.theta))


@dataclass(frozen=True)
class Intrinsics:
    # default depth stream, 640x480
    width: int = 640
    height: int = 480
    fx: float = 387.342498779297
    fy: float = 387.342498779297
    ppx: float = 321.910675048828
    ppy: float = 236.759078979492
    max_range: int = MAX_DEPTH_MM

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.ppx < self.width and 0 <= self.ppy < self.height):
            raise ValueError("principal point must lie inside the frame")

    def scaled(self, factor: float) -> "Intrinsics":
        return replace(self, width=int(round(self.width * factor)),
                       height=int(round(self.height * factor)),
                       fx=self.fx * factor, fy=self.fy * factor,
                       ppx=self.ppx * factor, ppy=self.ppy * factor)

    def fast(self) -> "Intrinsics":
        """160x120 variant for quick runs."""
        return self.scaled(160 / self.width)

    @property
    def horizontal_fov(self) -> float:
        return 2 * math.atan((self.width / 2) / self.fx)


@dataclass(frozen=True)
class CorruptionParams:
    dropout_rate: float = 0.0
    saturation_rate: float = 0.0
    blob_count: int = 0
    blob_radius: float = 10.0
    seed: int = 0
    saturation_mm: int = 200
    noise_std_mm: float = 0.0

    def __post_init__(self):
        if not (0 <= self.dropout_rate <= 1 and 0 <= self.saturation_rate <= 1):
            raise ValueError("corruption rates must lie in [0, 1]")
        if self.blob_count < 0 or self.blob_radius < 0 or self.noise_std_mm < 0:
            raise ValueError("blob and noise parameters must be non-negative")
        if not 0 <= self.saturation_mm <= MAX_DEPTH_MM:
            raise ValueError("saturation_mm out of range")

    @property
    def is_identity(self) -> bool:
        return (self.dropout_rate == 0 and self.saturation_rate == 0
                and self.blob_count == 0 and self.noise_std_mm == 0)


@dataclass(frozen=True)
class EpisodeConfig:
    dt: float = 1 / 30
    max_steps: int = 3000
    start_x: float = 0.0
    start_y: float = 0.0
    start_theta: float = 0.0
    # per-seed uniform jitter half-widths applied to the start pose
    start_jitter_y: float = 0.0
    start_jitter_theta: float = 0.0
    # corruption is applied for corruption_start <= t < corruption_end
    corruption_start: float = 0.0
    corruption_end: float = math.inf
    classifier: str = "oracle"  # oracle | heuristic | none
    camera_height: float = 0.4
    camera_offset: float = 0.2
    robot_radius: float = 0.25
    fast_mode: bool = False

    def __post_init__(self):
        if self.dt <= 0 or self.max_steps < 1:
            raise ValueError("dt and max_steps must be positive")
        if self.classifier not in ("oracle", "heuristic", "none"):
            raise ValueError(f"unknown classifier {self.classifier!r}")


# -- rendering ---------------------------------------------------------------

@lru_cache(maxsize=8)
def ray_directions(intr: Intrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel rightward and downward slopes ``((u-ppx)/fx, (v-ppy)/fy)``."""
    u = (np.arange(intr.width) - intr.ppx) / intr.fx
    v = (np.arange(intr.height) - intr.ppy) / intr.fy
    right, down = np.meshgrid(u, v)
    right.flags.writeable = False
    down.flags.writeable = False
    return right, down


def camera_position(pose: Pose, camera_offset: float = 0.0) -> tuple[float, float]:
    return (pose.x + camera_offset * math.cos(pose.theta),
            pose.y + camera_offset * math.sin(pose.theta))


def render_depth(world: WorldConfig, pose: Pose, intr: Intrinsics = Intrinsics(),
                 camera_height: float = 0.4, camera_offset: float = 0.0) -> np.ndarray:
    """Ray-cast a z-depth frame in millimeters.

    Rays that hit nothing within range (sky, the open row end, gaps in the
    walls) read ``max_range``.
    """
    right, down = ray_directions(intr)
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    cx, cy = camera_position(pose, camera_offset)
    cz = camera_height
    # world direction for unit forward component: t is the z-depth
    dx = c + right * s
    dy = s - right * c

    best = np.full(right.shape, np.inf)

    def take(t, ok):
        np.minimum(best, np.where(ok & (t > 0), t, np.inf), out=best)

    half = world.row_spacing / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        for side, wy in (("left", half), ("right", -half)):
            t = (wy - cy) / dy
            hx = cx + t * dx
            hz = cz - t * down
            ok = (hx >= 0) & (hx <= world.row_length) & (hz >= 0) & (hz <= world.wall_height)
            for h in world.holes:
                if h.side == side:
                    ok &= ~((hx >= h.start) & (hx <= h.start + h.length) & (hz <= h.height))
            take(t, ok)

        if world.end_wall:
            t = (world.row_length - cx) / dx
            hy = cy + t * dy
            hz = cz - t * down
            take(t, (np.abs(hy) <= half) & (hz >= 0) & (hz <= world.wall_height))

        if world.ground_plane:
            take(cz / down, down > 0)

        for o in world.obstacles:
            ex, ey = cx - o.x, cy - o.lateral
            a = dx * dx + dy * dy
            b = 2 * (dx * ex + dy * ey)
            cc = ex * ex + ey * ey - o.radius * o.radius
            disc = b * b - 4 * a * cc
            t = (-b - np.sqrt(np.maximum(disc, 0))) / (2 * a)
            hz = cz - t * down
            take(t, (disc >= 0) & (hz >= 0) & (hz <= o.height))

    mm = np.where(np.isfinite(best), np.rint(best * 1000), intr.max_range)
    return np.clip(mm, 0, intr.max_range).astype(np.uint16)


def depth_to_rgb(frame: np.ndarray, max_range: int = MAX_DEPTH_MM) -> np.ndarray:
    """Gray visualization of a depth frame (near = bright), shape ``(h, w, 3)``."""
    g = 255 - np.rint(frame.astype(np.float64) * (255 / max_range))
    g[frame == 0] = 0
    g = g.astype(np.uint8)
    return np.repeat(g[:, :, None], 3, axis=2)


def corrupt(frame: np.ndarray, params: CorruptionParams,
            rng: np.random.Generator | None = None) -> np.ndarray:
    """Inject sensor noise and glare plus dropout; deterministic for a given seed."""
    if params.is_identity:
        return frame.copy()
    if rng is None:
        rng = np.random.default_rng(params.seed)
    out = frame.astype(np.float64)
    h, w = frame.shape
    if params.noise_std_mm > 0:
        valid = out > 0
        out[valid] += rng.normal(0, params.noise_std_mm, size=int(valid.sum()))
        out[valid] = np.clip(out[valid], 1, MAX_DEPTH_MM)
    if params.saturation_rate > 0:
        out[rng.random((h, w)) < params.saturation_rate] = params.saturation_mm
    if params.blob_count > 0:
        yy, xx = np.mgrid[0:h, 0:w]
        for by, bx in zip(rng.uniform(0, h, params.blob_count), rng.uniform(0, w, params.blob_count)):
            out[(yy - by) ** 2 + (xx - bx) ** 2 <= params.blob_radius ** 2] = params.saturation_mm
    if params.dropout_rate > 0:
        out[rng.random((h, w)) < params.dropout_rate] = 0
    return np.rint(out).astype(np.uint16)


def step_kinematics(pose: Pose, cmd: ControlCommand, dt: float) -> Pose:
    """Exact unicycle integration over *dt*."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    v, w, th = cmd.linear, cmd.angular, pose.theta
    if abs(w) < 1e-9:
        return Pose(pose.x + v * math.cos(th) * dt, pose.y + v * math.sin(th) * dt, th)
    # chord of the arc along the mid-heading; no cancellation for small w
    h = w * dt / 2
    chord = v * dt * math.sin(h) / h
    return Pose(pose.x + chord * math.cos(th + h), pose.y + chord * math.sin(th + h), th + 2 * h)


def collides(pose: Pose, world: WorldConfig, robot_radius: float) -> bool:
    if 0 <= pose.x <= world.row_length and abs(pose.y) > world.row_spacing / 2 - robot_radius:
        return True
    return any(math.hypot(pose.x - o.x, pose.y - o.lateral) < o.radius + robot_radius
               for o in world.obstacles)


def clearance(pose: Pose, world: WorldConfig, robot_radius: float) -> float:
    """Gap between the robot footprint and the nearest obstacle (inf without any)."""
    return min((math.hypot(pose.x - o.x, pose.y - o.lateral) - o.radius - robot_radius
                for o in world.obstacles), default=math.inf)


def row_end_column(world: WorldConfig, pose: Pose, intr: Intrinsics,
                   camera_offset: float = 0.0) -> float:
    """Image column where the row-end center ``(row_length, 0)`` projects."""
    cx, cy = camera_position(pose, camera_offset)
    ex, ey = world.row_length - cx, -cy
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    fwd = ex * c + ey * s
    rgt = ex * s - ey * c
    if fwd <= 0:
        return math.nan
    return intr.ppx + intr.fx * rgt / fwd


# -- episodes ----------------------------------------------------------------

@dataclass
class HarvestRecord:
    sample: LabeledSample
    pose: Pose
    oracle: ViewClass | None


@dataclass
class EpisodeLog:
    t: list[float] = field(default_factory=list)
    x: list[float] = field(default_factory=list)
    y: list[float] = field(default_factory=list)
    theta: list[float] = field(default_factory=list)
    v: list[float] = field(default_factory=list)
    omega: list[float] = field(default_factory=list)
    source: list[Source] = field(default_factory=list)
    d: list[float] = field(default_factory=list)
    obstacle: list[bool] = field(default_factory=list)
    # depth window that misses the true row-end column
    false_window: list[bool] = field(default_factory=list)
    latency_ms: list[float] = field(default_factory=list)
    completed: bool = False
    collision: bool = False
    stopped: bool = False
    error: str | None = None
    final_pose: Pose | None = None
    final_clearance: float = math.inf
    samples: list[HarvestRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.t)

    def append(self, t, pose: Pose, cmd: ControlCommand, d: float, obstacle=False,
               latency_ms=0.0, false_window=False):
        self.t.append(t)
        self.x.append(pose.x)
        self.y.append(pose.y)
        self.theta.append(pose.theta)
        self.v.append(cmd.linear)
        self.omega.append(cmd.angular)
        self.source.append(cmd.source)
        self.d.append(d)
        self.obstacle.append(obstacle)
        self.false_window.append(false_window)
        self.latency_ms.append(latency_ms)


class EmptyLog(ValueError):
    pass


@dataclass(frozen=True)
class EpisodeMetrics:
    completed: bool
    collision: bool
    stopped: bool
    steps: int
    mean_abs_y: float
    max_abs_y: float
    fallback_fraction: float
    false_window_rate: float
    mean_latency_ms: float
    final_clearance: float


def metrics(log: EpisodeLog) -> EpisodeMetrics:
    n = len(log)
    if n == 0:
        raise EmptyLog("episode log has no step")
    ay = np.abs(np.asarray(log.y, dtype=float))
    fb = sum(1 for s in log.source if s is Source.FALLBACK)
    return EpisodeMetrics(
        completed=log.completed, collision=log.collision, stopped=log.stopped, steps=n,
        mean_abs_y=float(ay.mean()), max_abs_y=float(ay.max()),
        fallback_fraction=fb / n,
        false_window_rate=sum(log.false_window) / n,
        mean_latency_ms=float(np.mean(log.latency_ms)),
        final_clearance=log.final_clearance,
    )


def start_pose(episode: EpisodeConfig, seed: int) -> Pose:
    rng = np.random.default_rng(seed)
    jy, jt = rng.uniform(-1, 1, 2)
    return Pose(episode.start_x, episode.start_y + jy * episode.start_jitter_y,
                episode.start_theta + jt * episode.start_jitter_theta)


def run_episode(world: WorldConfig = WorldConfig(),
                episode: EpisodeConfig = EpisodeConfig(),
                controller: ControllerParams = ControllerParams(),
                pipeline: DepthPipelineParams = DepthPipelineParams(),
                fallback: FallbackParams = FallbackParams(),
                corruption: CorruptionParams = CorruptionParams(),
                intr: Intrinsics = Intrinsics(),
                seed: int = 0,
                classifier=None,
                harvest: bool = False,
                frame_sink=None) -> EpisodeLog:
    """Closed loop render -> corrupt -> arbitrate -> integrate.

    Stops when the robot leaves the row end, collides, receives an
    emergency stop, or after ``max_steps``. *classifier* may be an object
    following the ``Classifier`` protocol, overriding ``episode.classifier``.
    *frame_sink*, when given, is called with ``(step, frame)`` for every
    frame fed to the arbiter.
    """
    if episode.fast_mode:
        intr = intr.fast()
    controller = replace(controller, frame_width=intr.width)
    pose = start_pose(episode, seed)
    state = ArbiterState()
    log = EpisodeLog()
    harvester = LabelHarvester(fallback, intr.width) if harvest else None
    pending_poses: list[Pose] = []
    t = 0.0

    for step in range(episode.max_steps):
        frame = render_depth(world, pose, intr, episode.camera_height, episode.camera_offset)
        if episode.corruption_start <= t < episode.corruption_end and not corruption.is_identity:
            frame = corrupt(frame, corruption, np.random.default_rng([corruption.seed, seed, step]))
        if frame_sink is not None:
            frame_sink(step, frame)

        t0 = time.perf_counter()
        det = detect_row_end(frame, pipeline)
        view = None
        try:
            if classifier is not None:
                view = classify_frame(classifier, depth_to_rgb(frame))[0]
            elif episode.classifier == "oracle":
                view = oracle_classify(pose, world, fallback)
            elif episode.classifier == "heuristic":
                mask = far_field_mask(frame, pipeline.t_distance, pipeline.min_far_depth)
                if mask is not None:
                    view = heuristic_classify(mask, fallback)[0]
        except (NoFarField, OutsideCorridor):
            view = None
        try:
            cmd, state = arbiter_step(frame, view, state, controller, pipeline, fallback,
                                      detection=det)
        except ClassifierUnavailable as exc:
            log.error = str(exc)
            break
        latency = (time.perf_counter() - t0) * 1000

        d = math.nan
        false_window = False
        if det is not None:
            d = lateral_offset(det, intr.width)
            col = row_end_column(world, pose, intr, episode.camera_offset)
            # only scored while the row end is in view
            if 0 <= col < intr.width:
                false_window = not det.window.x_min <= col <= det.window.x_max
        log.append(t, pose, cmd, d, check_obstacle(frame, pipeline), latency, false_window)

        if harvester is not None:
            pending_poses.append(pose)
            sample = harvester.push(det, depth_to_rgb(frame), t)
            if len(pending_poses) == harvester.window:
                poses, pending_poses = pending_poses, []
                if sample is not None:
                    p = poses[sample.index]
                    try:
                        oracle = oracle_classify(p, world, fallback)
                    except OutsideCorridor:
                        oracle = None
                    log.samples.append(HarvestRecord(sample, p, oracle))

        if cmd.source is Source.EMERGENCY_STOP:
            log.stopped = True
            break
        pose = step_kinematics(pose, cmd, episode.dt)
        t += episode.dt
        if collides(pose, world, episode.robot_radius):
            log.collision = True
            break
        if pose.x > world.row_length:
            log.completed = True
            break

    log.final_pose = pose
    log.final_clearance = clearance(pose, world, episode.robot_radius)
    return log
