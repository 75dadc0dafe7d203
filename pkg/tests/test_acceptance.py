"""Acceptance criteria A1-A10, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py`` (the lines are repeated in the
terminal summary) or directly with ``python tests/test_acceptance.py``.
"""

import math
import statistics
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from oracles import choose_window, flood_fill_components  # noqa: E402
from rowpilot.config import ConfigError, format_config, parse_config  # noqa: E402
from rowpilot.control import (  # noqa: E402
    ControlCommand, ControllerParams, Source, angular_velocity, depth_command, linear_velocity,
)
from rowpilot.depth import (  # noqa: E402
    DepthPipelineParams, extract_components, normalize_depth, select_window, threshold_far_field,
)
from rowpilot.fallback import LabeledSample, ViewClass  # noqa: E402
from rowpilot.formats import (  # noqa: E402
    FormatError, read_depth_pgm, read_episode_log, read_manifest, read_rgb_ppm, write_depth_pgm,
    write_episode_log, write_manifest, write_rgb_ppm,
)
from rowpilot.sim import (  # noqa: E402
    CorruptionParams, EpisodeConfig, EpisodeLog, Intrinsics, Obstacle, Pose, WorldConfig,
    corrupt, metrics, render_depth, run_episode,
)

RESULTS: list[str] = []


def report(cid, ok, detail):
    line = f"{cid} {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


UNIT = ControllerParams(max_lin_vel=1.0, max_ang_vel=1.0, frame_width=640)
CORRIDOR = WorldConfig(row_length=30.0, row_spacing=2.5)


def test_a1_control_law_exactness():
    t0 = time.perf_counter()
    ds = [-320, -160, 0, 160, 320]
    v = [linear_velocity(d, UNIT) for d in ds]
    w = [angular_velocity(d, UNIT) for d in ds]
    elapsed = time.perf_counter() - t0
    err = max(max(abs(a - b) for a, b in zip(v, [0, 0.75, 1, 0.75, 0])),
              max(abs(a - b) for a, b in zip(w, [1, 0.25, 0, -0.25, -1])))
    report("A1", err <= 1e-12 and elapsed < 1.0, f"max error {err:.1e}, {elapsed * 1e3:.2f} ms")


def test_a2_complementarity():
    rng = np.random.default_rng(2)
    worst = 0.0
    for d in rng.uniform(-320, 320, 100_000):
        d = float(d)
        s = linear_velocity(d, UNIT) / UNIT.max_lin_vel + abs(angular_velocity(d, UNIT)) / UNIT.max_ang_vel
        worst = max(worst, abs(s - 1))
    report("A2", worst <= 1e-12, f"max |v/max_lin + |w|/max_ang - 1| = {worst:.1e} over 1e5 d")


def test_a3_detection_oracle_equivalence():
    rng = np.random.default_rng(3)
    mismatches, spent = 0, 0.0
    for _ in range(1000):
        h, w = (int(n) for n in rng.integers(1, 65, 2))
        mask = rng.random((h, w)) < rng.uniform(0.05, 0.7)
        t_area = float(rng.integers(1, max(2, h * w // 4)))
        t0 = time.perf_counter()
        det = select_window(extract_components(mask), t_area, w)
        spent += time.perf_counter() - t0
        got = None if det is None else (det.window.x_min, det.window.y_min,
                                         det.window.x_max, det.window.y_max)
        want = choose_window(flood_fill_components(mask.tolist())[1], t_area, w)
        mismatches += got != want
    report("A3", mismatches == 0 and spent < 10,
           f"{mismatches} mismatches on 1000 masks, library time {spent:.2f} s")


def test_a4_closed_loop_convergence():
    ep = EpisodeConfig(start_y=0.5, start_theta=0.0, start_jitter_y=0.05, start_jitter_theta=0.05,
                       fast_mode=True)
    t0 = time.perf_counter()
    good = 0
    for seed in range(20):
        log = run_episode(CORRIDOR, ep, seed=seed)
        tail = [abs(y) for x, y in zip(log.x, log.y) if x >= CORRIDOR.row_length - 10]
        good += log.completed and not log.collision and bool(tail) and max(tail) < 0.15
    elapsed = time.perf_counter() - t0
    report("A4", good >= 19 and elapsed < 120, f"{good}/20 seeds converged, {elapsed:.1f} s")


def test_a5_fallback_engagement():
    ep = EpisodeConfig(corruption_start=10.0, corruption_end=12.0, classifier="oracle",
                       fast_mode=True)
    corruption = CorruptionParams(saturation_rate=0.9, saturation_mm=1500)
    good, fractions = 0, []
    for seed in range(20):
        log = run_episode(CORRIDOR, ep, corruption=corruption, seed=seed)
        m = metrics(log)
        fractions.append(m.fallback_fraction)
        good += m.fallback_fraction > 0 and m.completed and not m.collision
    report("A5", good >= 18,
           f"{good}/20 seeds engaged fallback and completed, fallback_fraction "
           f"{min(fractions):.3f}..{max(fractions):.3f}")


def test_a6_emergency_stop():
    world = WorldConfig(row_length=30.0, obstacles=(Obstacle(3.0, 0.0, 0.2),))
    ep = EpisodeConfig(fast_mode=True)
    good, clearances = 0, []
    for seed in range(10):
        log = run_episode(world, ep, corruption=CorruptionParams(noise_std_mm=5.0, seed=seed),
                          seed=seed)
        first = log.obstacle.index(True) if True in log.obstacle else None
        prompt = first is not None and any(
            s is Source.EMERGENCY_STOP for s in log.source[first:first + 2])
        clearances.append(log.final_clearance)
        good += log.stopped and not log.collision and log.final_clearance > 0.3 and prompt
    report("A6", good == 10, f"{good}/10 seeds halted in time, min clearance {min(clearances):.3f} m")


def test_a7_latency_budget():
    intr = Intrinsics()
    pipe = DepthPipelineParams()
    rng = np.random.default_rng(7)
    frames = [corrupt(render_depth(CORRIDOR, Pose(float(x), float(y), float(th)), intr, 0.4, 0.2),
                      CorruptionParams(noise_std_mm=10.0), rng)
              for x, y, th in zip(rng.uniform(0, 25, 100), rng.uniform(-0.5, 0.5, 100),
                                  rng.uniform(-0.3, 0.3, 100))]
    h, w = frames[0].shape
    t_area = pipe.area_threshold(h, w)
    times = []
    for f in frames:
        t0 = time.perf_counter()
        mask = threshold_far_field(normalize_depth(f), pipe.t_distance)
        det = select_window(extract_components(mask), t_area, w)
        if det is not None:
            depth_command(det, UNIT)
        times.append((time.perf_counter() - t0) * 1e3)
    med = statistics.median(times)
    report("A7", med < 21.2, f"median {med:.2f} ms (p90 {np.percentile(times, 90):.2f} ms) at 640x480")


def test_a8_renderer_geometry():
    intr = Intrinsics()
    world = WorldConfig(row_length=10.0, end_wall=True, ground_plane=False)
    f = render_depth(world, Pose(8.0, 0.0, 0.0), intr)
    pp = int(f[int(round(intr.ppy)), int(round(intr.ppx))])
    # side-wall hits of the outermost columns give the edge-ray angles back
    side = WorldConfig(row_length=30.0, row_spacing=2.5, ground_plane=False)
    g = render_depth(side, Pose(0.0, 0.0, 0.0), intr)
    row = int(round(intr.ppy))
    left = math.atan(1250 / int(g[row, 0]))
    right = math.atan(1250 / int(g[row, -1]))
    # the outer pixel edges sit half a pixel beyond the outermost centers
    half_fov = (left + right) / 2 + 0.5 / intr.fx
    want = math.atan(320 / 387.3425)
    err = abs(math.degrees(half_fov - want))
    report("A8", abs(pp - 2000) <= 1 and err < 0.1,
           f"principal-point depth {pp} mm, edge-ray angle error {err:.3f} deg")


def _random_log(rng):
    log = EpisodeLog()
    for _ in range(int(rng.integers(0, 8))):
        x, y, th, v, w, d = rng.normal(0, 10, 6)
        log.append(float(rng.uniform(0, 100)), Pose(float(x), float(y), float(th)),
                   ControlCommand(float(v), float(w), Source(rng.choice([s.value for s in Source]))),
                   float(d) if rng.random() > 0.2 else math.nan)
    return log


def _same_log(a, b):
    cols = ("t", "x", "y", "theta", "v", "omega", "source", "d")
    return all(len(getattr(a, c)) == len(getattr(b, c)) for c in cols) and all(
        u == v or (isinstance(u, float) and math.isnan(u) and math.isnan(v))
        for c in cols for u, v in zip(getattr(a, c), getattr(b, c)))


def _random_config_text(rng):
    lines = [f"pipeline.t_distance = {rng.uniform(0.05, 0.95)!r}",
             f"controller.max_ang_vel = {rng.uniform(0.1, 3)!r}",
             f"world.row_length = {rng.uniform(20, 60)!r}",
             f"corruption.seed = {int(rng.integers(0, 2**31))}",
             f"episode.classifier = {rng.choice(['oracle', 'heuristic', 'none'])}"]
    if rng.random() < 0.5:
        lines.append(f"world.holes = left:{rng.uniform(0, 10)!r}:{rng.uniform(0.1, 3)!r}:1.0")
    if rng.random() < 0.5:
        lines.append("pipeline.t_area = auto")
    rng.shuffle(lines)
    return "\n".join(lines[: int(rng.integers(1, len(lines) + 1))])


def test_a9_format_round_trips():
    rng = np.random.default_rng(9)
    failures = 0
    valid = []
    for _ in range(1000):
        h, w = (int(n) for n in rng.integers(1, 24, 2))
        depth = rng.integers(0, 8001, (h, w)).astype(np.uint16)
        pgm = write_depth_pgm(depth)
        failures += not np.array_equal(read_depth_pgm(pgm), depth)
        rgb = rng.integers(0, 256, (h, w, 3)).astype(np.uint8)
        ppm = write_rgb_ppm(rgb)
        failures += not np.array_equal(read_rgb_ppm(ppm), rgb)
        log = _random_log(rng)
        ep_csv = write_episode_log(log)
        failures += not _same_log(read_episode_log(ep_csv), log)
        samples = [LabeledSample(f"s{int(rng.integers(0, 10**6))}.ppm", ViewClass(rng.choice(["Left", "Center", "Right"])),
                                 float(rng.normal(0, 200)), float(rng.uniform(0, 1e4)),
                                 float(rng.uniform(0, 100))) for _ in range(int(rng.integers(0, 5)))]
        man = write_manifest(samples)
        failures += read_manifest(man) != samples
        cfg = parse_config(_random_config_text(rng))
        cfg_text = format_config(cfg)
        failures += parse_config(cfg_text) != cfg
        valid.append((pgm, ppm, ep_csv.encode(), man.encode(), cfg_text.encode()))

    parsers = (read_depth_pgm, read_rgb_ppm, read_episode_log, read_manifest, parse_config)
    errors = (FormatError, FormatError, FormatError, FormatError, ConfigError)
    crashes = 0
    for i in range(10_000):
        base = valid[i % len(valid)][i % 5]
        kind = rng.integers(0, 3)
        if kind == 0:
            data = rng.integers(0, 256, int(rng.integers(0, 64))).astype(np.uint8).tobytes()
        else:
            buf = bytearray(base)
            for _ in range(int(rng.integers(1, 6))):
                if buf and kind == 1:
                    buf[int(rng.integers(0, len(buf)))] = int(rng.integers(0, 256))
                elif buf:
                    del buf[int(rng.integers(0, len(buf))):]
            data = bytes(buf)
        for parse, err in zip(parsers, errors):
            try:
                parse(data)
            except err:
                pass
            except Exception:
                crashes += 1
    report("A9", failures == 0 and crashes == 0,
           f"{failures} round-trip failures on 1000 instances x 5 formats, "
           f"{crashes} crashes on 10000 fuzzed inputs x 5 parsers")


def test_a10_auto_label_consistency():
    ep = EpisodeConfig(start_jitter_y=0.4, start_jitter_theta=0.5, fast_mode=True)
    agree = total = 0
    for seed in range(20):
        log = run_episode(CORRIDOR, ep, seed=seed, harvest=True)
        for rec in log.samples:
            if rec.oracle is None:
                continue
            total += 1
            agree += rec.sample.label is rec.oracle
    rate = agree / total if total else 0.0
    report("A10", total > 0 and rate >= 0.95, f"{agree}/{total} harvested labels agree ({rate:.1%})")


if __name__ == "__main__":
    failed = 0
    for name, fn in list(globals().items()):
        if name.startswith("test_a") and callable(fn):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
