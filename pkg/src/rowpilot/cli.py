"""Command line entry point: ``rowpilot <subcommand> [options]``.

Exit codes: 0 success, 1 episode failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from rowpilot.config import Config, ConfigError, parse_config
from rowpilot.control import (
    ArbiterState, ClassifierUnavailable, ControlCommand, Source, angular_velocity, arbiter_step,
    lateral_offset, linear_velocity,
)
from rowpilot.depth import detect_row_end, far_field_mask
from rowpilot.fallback import NoFarField, heuristic_classify
from rowpilot.formats import (
    FormatError, fmt_float, frames_row, read_depth_pgm, write_depth_pgm, write_episode_log,
    write_frames_csv, write_manifest, write_rgb_ppm,
)
from rowpilot.sim import EpisodeLog, metrics, run_episode

log = logging.getLogger("rowpilot")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def load_config(path: str | None) -> Config:
    path = path or os.environ.get("ROWPILOT_CONFIG")
    if not path:
        return Config()
    try:
        text = Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    try:
        return parse_config(text)
    except ConfigError as exc:
        raise UsageError(f"{path}: {exc}") from None


def episode_succeeded(ep: EpisodeLog) -> bool:
    """Reaching the row end or halting on an emergency stop counts as success."""
    return ep.error is None and not ep.collision and (ep.completed or ep.stopped)


def _summary_lines(prefix: str, ep: EpisodeLog) -> list[str]:
    m = metrics(ep) if len(ep) else None
    out = [f"{prefix}.completed = {str(ep.completed).lower()}",
           f"{prefix}.collision = {str(ep.collision).lower()}",
           f"{prefix}.stopped = {str(ep.stopped).lower()}",
           f"{prefix}.steps = {len(ep)}"]
    if m is not None:
        out += [f"{prefix}.mean_abs_y = {fmt_float(m.mean_abs_y)}",
                f"{prefix}.max_abs_y = {fmt_float(m.max_abs_y)}",
                f"{prefix}.fallback_fraction = {fmt_float(m.fallback_fraction)}",
                f"{prefix}.false_window_rate = {fmt_float(m.false_window_rate)}",
                f"{prefix}.final_clearance = {fmt_float(m.final_clearance)}"]
    if ep.error:
        out.append(f"{prefix}.error = {ep.error}")
    return out


def cmd_run_sim(cfg: Config, seed: int, out: Path, episodes: int, dump_frames: bool = False) -> int:
    out.mkdir(parents=True, exist_ok=True)
    summary, ok_count, fallback_steps, total_steps = [], 0, 0, 0
    for i in range(episodes):
        sink = None
        if dump_frames:
            fdir = out / f"episode_{i:03d}_frames"
            fdir.mkdir(exist_ok=True)

            def sink(step, frame, fdir=fdir):
                (fdir / f"frame_{step:05d}.pgm").write_bytes(write_depth_pgm(frame))

        ep = run_episode(**cfg.episode_kwargs(), seed=seed + i, frame_sink=sink)
        (out / f"episode_{i:03d}.csv").write_text(write_episode_log(ep))
        ok = episode_succeeded(ep)
        ok_count += ok
        fallback_steps += sum(s is Source.FALLBACK for s in ep.source)
        total_steps += len(ep)
        summary += _summary_lines(f"episode_{i:03d}", ep)
        if len(ep):
            log.info("episode %d: %s, %d steps, mean latency %.2f ms", i,
                     "ok" if ok else "FAILED", len(ep), metrics(ep).mean_latency_ms)
        else:
            log.info("episode %d: FAILED before the first step", i)
    summary += [f"total.episodes = {episodes}",
                f"total.succeeded = {ok_count}",
                f"total.fallback_fraction = {fmt_float(fallback_steps / max(total_steps, 1))}"]
    (out / "summary.txt").write_text("\n".join(summary) + "\n")
    return EXIT_OK if ok_count == episodes else EXIT_FAILURE


def cmd_process_frames(cfg: Config, frames_dir: Path, out: Path) -> int:
    if not frames_dir.is_dir():
        raise UsageError(f"{frames_dir} is not a directory")
    files = sorted(p for p in frames_dir.iterdir() if p.suffix == ".pgm")
    if not files:
        raise UsageError(f"no .pgm frames in {frames_dir}")
    out.mkdir(parents=True, exist_ok=True)
    state = ArbiterState()
    rows = []
    for path in files:
        try:
            frame = read_depth_pgm(path.read_bytes())
        except (OSError, FormatError) as exc:
            log.warning("%s: %s", path.name, exc)
            rows.append(frames_row(path.name, "error"))
            continue
        controller = replace(cfg.controller, frame_width=frame.shape[1])
        det = detect_row_end(frame, cfg.pipeline)
        view = None
        if cfg.episode.classifier == "heuristic":
            mask = far_field_mask(frame, cfg.pipeline.t_distance, cfg.pipeline.min_far_depth)
            try:
                view = heuristic_classify(mask, cfg.fallback)[0] if mask is not None else None
            except NoFarField:
                view = None
        try:
            cmd, state = arbiter_step(frame, view, state, controller, cfg.pipeline, cfg.fallback,
                                      detection=det)
        except ClassifierUnavailable:
            # no command available: the platform is stopped
            cmd = ControlCommand.stop()
        if det is None:
            rows.append(frames_row(path.name, "no", v=cmd.linear, omega=cmd.angular,
                                   source=cmd.source.value))
        else:
            rows.append(frames_row(path.name, "yes", det.center_x,
                                   lateral_offset(det, frame.shape[1]), cmd.linear, cmd.angular,
                                   cmd.source.value))
    (out / "frames.csv").write_text(write_frames_csv(rows))
    return EXIT_OK


def cmd_calibrate(cfg: Config, seed: int, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    lines = ["t_distance,t_area,completion_rate,false_window_rate"]
    cal = cfg.calibrate
    for td in cal.t_distance_values:
        for ta in cal.t_area_values:
            pipeline = replace(cfg.pipeline, t_distance=td, t_area=ta)
            kwargs = {**cfg.episode_kwargs(), "pipeline": pipeline}
            done, false_steps, steps = 0, 0, 0
            for i in range(cal.episodes):
                ep = run_episode(**kwargs, seed=seed + i)
                done += episode_succeeded(ep)
                false_steps += sum(ep.false_window)
                steps += len(ep)
            lines.append(",".join([fmt_float(td), fmt_float(ta), fmt_float(done / cal.episodes),
                                   fmt_float(false_steps / max(steps, 1))]))
            log.info("t_distance=%g t_area=%g: %s", td, ta, lines[-1])
    (out / "calibration.csv").write_text("\n".join(lines) + "\n")
    return EXIT_OK


def curves_csv(cfg: Config) -> str:
    w = cfg.controller.frame_width
    lines = ["d,v,omega"]
    for d in np.linspace(-w / 2, w / 2, cfg.curves.samples):
        d = float(d)
        lines.append(",".join([fmt_float(d), fmt_float(linear_velocity(d, cfg.controller)),
                               fmt_float(angular_velocity(d, cfg.controller))]))
    return "\n".join(lines) + "\n"


def cmd_curves(cfg: Config, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    (out / "curves.csv").write_text(curves_csv(cfg))
    return EXIT_OK


def cmd_harvest(cfg: Config, seed: int, out: Path, episodes: int) -> int:
    out.mkdir(parents=True, exist_ok=True)
    samples = []
    for i in range(episodes):
        ep = run_episode(**cfg.episode_kwargs(), seed=seed + i, harvest=True)
        for k, rec in enumerate(ep.samples):
            name = f"ep{i:03d}_{k:05d}.ppm"
            (out / name).write_bytes(write_rgb_ppm(rec.sample.frame))
            rec.sample.path = name
            samples.append(rec.sample)
        log.info("episode %d: %d samples", i, len(ep.samples))
    (out / "manifest.csv").write_text(write_manifest(samples))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file (falls back to $ROWPILOT_CONFIG)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--episodes", type=int, help="override run.episodes")
    common.add_argument("--quiet", action="store_true")

    p = argparse.ArgumentParser(prog="rowpilot", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    rs = sub.add_parser("run-sim", parents=[common], help="simulate closed-loop episodes")
    rs.add_argument("--dump-frames", action="store_true", help="also write every depth frame")
    pf = sub.add_parser("process-frames", parents=[common], help="replay recorded .pgm frames")
    pf.add_argument("frames_dir", type=Path)
    sub.add_parser("calibrate", parents=[common], help="sweep t_distance x t_area")
    sub.add_parser("curves", parents=[common], help="emit the velocity control curves")
    sub.add_parser("harvest", parents=[common], help="collect auto-labeled samples")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    out = Path(args.out)
    try:
        cfg = load_config(args.config)
        if args.episodes is not None and args.episodes < 1:
            raise UsageError("--episodes must be >= 1")
        if args.seed < 0:
            raise UsageError("--seed must be non-negative")
        if args.command == "run-sim":
            return cmd_run_sim(cfg, args.seed, out, args.episodes or cfg.run.episodes,
                               args.dump_frames)
        if args.command == "process-frames":
            return cmd_process_frames(cfg, args.frames_dir, out)
        if args.command == "calibrate":
            if args.episodes:
                cfg = replace(cfg, calibrate=replace(cfg.calibrate, episodes=args.episodes))
            return cmd_calibrate(cfg, args.seed, out)
        if args.command == "curves":
            return cmd_curves(cfg, out)
        return cmd_harvest(cfg, args.seed, out, args.episodes or cfg.run.harvest_episodes)
    except UsageError as exc:
        print(f"rowpilot: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
