"""Flat ``section.key = value`` configuration.

Every key has a default, so an empty file is a valid configuration::

    # pipeline thresholds
    pipeline.t_distance = 0.6
    pipeline.t_area = auto
    world.holes = left:4:1.5:1.0, right:12:0.5:0.8
    world.obstacles = 3:0:0.2:1.0
    calibrate.t_distance_values = 0.4, 0.5, 0.6
"""

from __future__ import annotations

import dataclasses
import math
import typing
from dataclasses import dataclass, field

from rowpilot.control import ControllerParams
from rowpilot.depth import DepthPipelineParams
from rowpilot.fallback import FallbackParams
from rowpilot.sim import CorruptionParams, EpisodeConfig, Hole, Intrinsics, Obstacle, WorldConfig


@dataclass(frozen=True)
class RunParams:
    episodes: int = 1
    harvest_episodes: int = 1

    def __post_init__(self):
        if self.episodes < 1 or self.harvest_episodes < 1:
            raise ValueError("episode counts must be >= 1")


@dataclass(frozen=True)
class CalibrateParams:
    t_distance_values: tuple[float, ...] = (0.5,)
    t_area_values: tuple[float, ...] = (192.0,)
    episodes: int = 1

    def __post_init__(self):
        if not self.t_distance_values or not self.t_area_values:
            raise ValueError("sweep grids must be nonempty")
        if any(not 0 < t < 1 for t in self.t_distance_values):
            raise ValueError("t_distance values must lie in (0, 1)")
        if any(a <= 0 for a in self.t_area_values) or self.episodes < 1:
            raise ValueError("t_area values and episodes must be positive")


@dataclass(frozen=True)
class CurvesParams:
    samples: int = 641

    def __post_init__(self):
        if self.samples < 2:
            raise ValueError("curves need at least 2 samples")


@dataclass(frozen=True)
class Config:
    pipeline: DepthPipelineParams = field(default_factory=DepthPipelineParams)
    controller: ControllerParams = field(default_factory=ControllerParams)
    fallback: FallbackParams = field(default_factory=FallbackParams)
    world: WorldConfig = field(default_factory=WorldConfig)
    camera: Intrinsics = field(default_factory=Intrinsics)
    corruption: CorruptionParams = field(default_factory=CorruptionParams)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    run: RunParams = field(default_factory=RunParams)
    calibrate: CalibrateParams = field(default_factory=CalibrateParams)
    curves: CurvesParams = field(default_factory=CurvesParams)

    def episode_kwargs(self) -> dict:
        return dict(world=self.world, episode=self.episode, controller=self.controller,
                    pipeline=self.pipeline, fallback=self.fallback,
                    corruption=self.corruption, intr=self.camera)


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigSyntaxError(ConfigError):
    pass


class UnknownKey(ConfigError):
    pass


class TypeMismatch(ConfigError):
    def __init__(self, key: str, message: str, line: int | None = None):
        super().__init__(f"{key}: {message}", line)
        self.key = key


class InvalidValue(ConfigError):
    pass


def _field_types(cls) -> dict[str, typing.Any]:
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in dataclasses.fields(cls)}


def _parse_float(text: str) -> float:
    v = float(text)
    if math.isnan(v):
        raise ValueError("nan is not allowed")
    return v


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"{text!r} is not a boolean")


def _items(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()] if text.strip() else []


def _parse_hole(text: str) -> Hole:
    side, start, length, height = text.split(":")
    return Hole(side.strip().lower(), *(_parse_float(p) for p in (start, length, height)))


def _parse_obstacle(text: str) -> Obstacle:
    return Obstacle(*(_parse_float(p) for p in text.split(":")))


def _parse_value(tp, text: str):
    if tp is bool:
        return _parse_bool(text)
    if tp is int:
        return int(text)
    if tp is float:
        return _parse_float(text)
    if tp is str:
        return text
    if tp == (float | None) or tp == typing.Optional[float]:
        return None if text.lower() in ("auto", "none", "") else _parse_float(text)
    if tp == tuple[float, ...]:
        return tuple(_parse_float(p) for p in _items(text))
    if tp == tuple[Hole, ...]:
        return tuple(_parse_hole(p) for p in _items(text))
    if tp == tuple[Obstacle, ...]:
        return tuple(_parse_obstacle(p) for p in _items(text))
    raise TypeError(f"unsupported config type {tp}")


def _format_value(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        parts = []
        for v in value:
            if isinstance(v, Hole):
                parts.append(f"{v.side}:{v.start!r}:{v.length!r}:{v.height!r}")
            elif isinstance(v, Obstacle):
                parts.append(f"{v.x!r}:{v.lateral!r}:{v.radius!r}:{v.height!r}")
            else:
                parts.append(repr(float(v)))
        return ", ".join(parts)
    return str(value)


SECTIONS = {f.name: typing.get_type_hints(Config)[f.name] for f in dataclasses.fields(Config)}


def known_keys() -> list[str]:
    return [f"{sec}.{name}" for sec, cls in SECTIONS.items() for name in _field_types(cls)]


def parse_config(text: str | bytes) -> Config:
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError:
            raise ConfigSyntaxError("config is not valid UTF-8") from None
    overrides: dict[str, dict[str, typing.Any]] = {}
    first_line: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigSyntaxError(f"expected 'key = value', got {line!r}", lineno)
        key, value = (p.strip() for p in line.split("=", 1))
        section, _, name = key.partition(".")
        if section not in SECTIONS or name not in _field_types(SECTIONS[section]):
            raise UnknownKey(f"unknown key {key!r}", lineno)
        tp = _field_types(SECTIONS[section])[name]
        try:
            parsed = _parse_value(tp, value)
        except (ValueError, TypeError, OverflowError) as exc:
            raise TypeMismatch(key, str(exc) or f"bad value {value!r}", lineno) from None
        overrides.setdefault(section, {})[name] = parsed
        first_line.setdefault(section, lineno)

    sections = {}
    for section, cls in SECTIONS.items():
        try:
            sections[section] = cls(**overrides.get(section, {}))
        except (ValueError, TypeError) as exc:
            raise InvalidValue(f"[{section}] {exc}", first_line.get(section)) from None
    return Config(**sections)


def format_config(cfg: Config) -> str:
    """Render *cfg* with every key spelled out; ``parse_config`` inverts it."""
    lines = []
    for section in SECTIONS:
        obj = getattr(cfg, section)
        for name in _field_types(type(obj)):
            lines.append(f"{section}.{name} = {_format_value(getattr(obj, name))}")
    return "\n".join(lines) + "\n"
