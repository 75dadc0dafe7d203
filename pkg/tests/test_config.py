import math

import pytest
from hypothesis import given, settings, strategies as st

from rowpilot.config import (
    Config, ConfigError, ConfigSyntaxError, InvalidValue, TypeMismatch, UnknownKey,
    format_config, known_keys, parse_config,
)
from rowpilot.sim import Hole, Obstacle


def test_empty_is_defaults():
    assert parse_config("") == Config()
    assert parse_config("# only a comment\n\n   \n") == Config()


def test_single_override():
    cfg = parse_config("pipeline.t_distance = 0.6")
    assert cfg.pipeline.t_distance == 0.6
    assert cfg.pipeline.stop_distance == Config().pipeline.stop_distance
    assert cfg.controller == Config().controller


def test_type_mismatch():
    with pytest.raises(TypeMismatch) as exc:
        parse_config("\npipeline.t_distance = high\n")
    assert exc.value.key == "pipeline.t_distance"
    assert exc.value.line == 2


def test_unknown_key_reports_line():
    with pytest.raises(UnknownKey) as exc:
        parse_config("pipeline.t_distance = 0.6\npipeline.bogus = 1\n")
    assert exc.value.line == 2
    with pytest.raises(UnknownKey):
        parse_config("nosection = 1")


def test_syntax_error():
    with pytest.raises(ConfigSyntaxError):
        parse_config("just words")


def test_invalid_value():
    with pytest.raises(InvalidValue):
        parse_config("pipeline.t_distance = 1.5")
    with pytest.raises(InvalidValue):
        parse_config("world.holes = up:1:1:1")


def test_rich_values():
    cfg = parse_config("""
        pipeline.t_area = auto          # 1% of the frame
        world.holes = left:4:1.5:1.0, right:12:0.5:0.8
        world.obstacles = 3:0:0.2
        world.end_wall = yes
        episode.classifier = heuristic
        episode.corruption_end = inf
        calibrate.t_distance_values = 0.4, 0.5, 0.6
    """)
    assert cfg.pipeline.t_area is None
    assert cfg.world.holes == (Hole("left", 4, 1.5, 1.0), Hole("right", 12, 0.5, 0.8))
    assert cfg.world.obstacles == (Obstacle(3, 0, 0.2),)
    assert cfg.world.end_wall is True
    assert cfg.episode.classifier == "heuristic"
    assert math.isinf(cfg.episode.corruption_end)
    assert cfg.calibrate.t_distance_values == (0.4, 0.5, 0.6)


def test_bytes_input():
    assert parse_config(b"controller.max_lin_vel = 0.8").controller.max_lin_vel == 0.8
    with pytest.raises(ConfigError):
        parse_config(b"\xff")


def test_known_keys_cover_format():
    keys = [line.split(" = ")[0] for line in format_config(Config()).splitlines()]
    assert keys == known_keys()
    assert "pipeline.t_distance" in keys and "episode.fast_mode" in keys


def test_default_round_trip():
    assert parse_config(format_config(Config())) == Config()


overrides = st.fixed_dictionaries({}, optional={
    "pipeline.t_distance": st.floats(0.01, 0.99),
    "pipeline.t_area": st.one_of(st.just("auto"), st.floats(1, 1e5)),
    "pipeline.stop_distance": st.floats(1, 5000),
    "controller.max_lin_vel": st.floats(0.01, 5),
    "controller.fallback_engage_count": st.integers(1, 20),
    "fallback.center_band": st.floats(1, 300),
    "world.row_length": st.floats(30, 100),
    "world.ground_plane": st.booleans(),
    "world.holes": st.lists(st.tuples(st.sampled_from(["left", "right"]), st.floats(0, 25),
                                      st.floats(0.01, 5), st.floats(0.01, 2)), max_size=3),
    "corruption.seed": st.integers(0, 2**31),
    "corruption.dropout_rate": st.floats(0, 1),
    "episode.dt": st.floats(0.001, 0.5),
    "episode.classifier": st.sampled_from(["oracle", "heuristic", "none"]),
})


def render(d):
    lines = []
    for k, v in d.items():
        if k == "world.holes":
            v = ", ".join(f"{s}:{a!r}:{b!r}:{c!r}" for s, a, b, c in v)
        elif isinstance(v, bool):
            v = str(v).lower()
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{k} = {v}")
    return "\n".join(lines)


@given(overrides)
def test_random_round_trip(d):
    cfg = parse_config(render(d))
    assert parse_config(format_config(cfg)) == cfg


@settings(max_examples=300)
@given(st.binary(max_size=80))
def test_fuzz_bytes(data):
    try:
        parse_config(data)
    except ConfigError:
        pass


@settings(max_examples=300)
@given(st.sampled_from(known_keys()), st.text(max_size=20))
def test_fuzz_values(key, value):
    try:
        parse_config(f"{key} = {value}")
    except ConfigError:
        pass
