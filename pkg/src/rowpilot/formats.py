"""Readers and writers for frames, episode logs and the sample manifest.

* depth frames: binary PGM ``P5``, maxval 65535, big-endian samples in mm
* RGB frames: binary PPM ``P6``, maxval 255
* episode logs and manifests: CSV with fixed headers
"""

from __future__ import annotations

import csv
import io
import math

import numpy as np

from rowpilot.control import Source
from rowpilot.depth import MAX_DEPTH_MM
from rowpilot.fallback import LabeledSample, ViewClass
from rowpilot.sim import EpisodeLog

EPISODE_HEADER = ["t", "x", "y", "theta", "v", "omega", "source", "d"]
MANIFEST_HEADER = ["path", "label", "offset_px", "sharpness", "timestamp"]
FRAMES_HEADER = ["frame", "detected", "x_w", "d", "v", "omega", "source"]

_WS = b" \t\n\r\v\f"


class FormatError(ValueError):
    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class MalformedHeader(FormatError):
    pass


class WrongMaxval(FormatError):
    pass


class TruncatedData(FormatError):
    pass


class DepthOutOfRange(FormatError):
    pass


class MalformedCSV(FormatError):
    pass


# -- netpbm ------------------------------------------------------------------

def _parse_netpbm_header(data: bytes, magic: bytes) -> tuple[int, int, int, int]:
    """Return ``(width, height, maxval, payload_offset)``."""
    if data[:2] != magic:
        raise MalformedHeader(f"expected magic {magic.decode()}", 0)
    pos = 2
    fields = []
    while len(fields) < 3:
        start = pos
        # whitespace and comments between tokens
        while pos < len(data) and (data[pos] in _WS or data[pos] == ord("#")):
            if data[pos] == ord("#"):
                while pos < len(data) and data[pos] not in b"\r\n":
                    pos += 1
            else:
                pos += 1
        if pos == start:
            raise MalformedHeader("missing whitespace between header fields", pos)
        tok_start = pos
        while pos < len(data) and data[pos:pos + 1].isdigit():
            pos += 1
        if pos == tok_start:
            raise MalformedHeader("expected a decimal number", pos)
        if pos - tok_start > 9:
            raise MalformedHeader("header number too large", tok_start)
        fields.append(int(data[tok_start:pos]))
    if pos >= len(data) or data[pos] not in _WS:
        raise MalformedHeader("expected a single whitespace after maxval", pos)
    width, height, maxval = fields
    if width == 0 or height == 0:
        raise MalformedHeader("frame dimensions must be positive", 2)
    return width, height, maxval, pos + 1


def read_depth_pgm(data: bytes) -> np.ndarray:
    width, height, maxval, off = _parse_netpbm_header(data, b"P5")
    if maxval != 65535:
        raise WrongMaxval(f"depth PGM needs maxval 65535, got {maxval}", off - 1)
    need = width * height * 2
    if len(data) - off < need:
        raise TruncatedData(f"expected {need} payload bytes, got {len(data) - off}", len(data))
    frame = np.frombuffer(data, dtype=">u2", count=width * height, offset=off).reshape(height, width)
    if frame.size and frame.max() > MAX_DEPTH_MM:
        bad = int(np.argmax(frame.ravel() > MAX_DEPTH_MM))
        raise DepthOutOfRange(f"depth sample above {MAX_DEPTH_MM} mm", off + 2 * bad)
    return frame.astype(np.uint16)


def write_depth_pgm(frame: np.ndarray) -> bytes:
    h, w = frame.shape
    return f"P5\n{w} {h}\n65535\n".encode() + np.ascontiguousarray(frame, dtype=">u2").tobytes()


def read_rgb_ppm(data: bytes) -> np.ndarray:
    width, height, maxval, off = _parse_netpbm_header(data, b"P6")
    if maxval != 255:
        raise WrongMaxval(f"RGB PPM needs maxval 255, got {maxval}", off - 1)
    need = width * height * 3
    if len(data) - off < need:
        raise TruncatedData(f"expected {need} payload bytes, got {len(data) - off}", len(data))
    return np.frombuffer(data, dtype=np.uint8, count=need, offset=off).reshape(height, width, 3).copy()


def write_rgb_ppm(frame: np.ndarray) -> bytes:
    h, w, _ = frame.shape
    return f"P6\n{w} {h}\n255\n".encode() + np.ascontiguousarray(frame, dtype=np.uint8).tobytes()


# -- CSV ---------------------------------------------------------------------

def fmt_float(x: float) -> str:
    return repr(float(x))


def _rows(data: bytes | str, header: list[str]):
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedCSV("not valid UTF-8", exc.start) from None
    try:
        rows = list(csv.reader(io.StringIO(data, newline="")))
    except csv.Error as exc:
        raise MalformedCSV(str(exc)) from None
    if not rows or rows[0] != header:
        raise MalformedCSV(f"expected header {','.join(header)}")
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise MalformedCSV(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        yield lineno, row


def _float(value: str, lineno: int) -> float:
    try:
        return float(value)
    except ValueError:
        raise MalformedCSV(f"line {lineno}: {value!r} is not a number") from None


def write_episode_log(log: EpisodeLog) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EPISODE_HEADER)
    for i in range(len(log)):
        w.writerow([fmt_float(log.t[i]), fmt_float(log.x[i]), fmt_float(log.y[i]),
                    fmt_float(log.theta[i]), fmt_float(log.v[i]), fmt_float(log.omega[i]),
                    log.source[i].value, fmt_float(log.d[i])])
    return buf.getvalue()


def read_episode_log(data: bytes | str) -> EpisodeLog:
    log = EpisodeLog()
    sources = {s.value: s for s in Source}
    for lineno, row in _rows(data, EPISODE_HEADER):
        t, x, y, th, v, om = (_float(c, lineno) for c in row[:6])
        if row[6] not in sources:
            raise MalformedCSV(f"line {lineno}: unknown source {row[6]!r}")
        log.t.append(t)
        log.x.append(x)
        log.y.append(y)
        log.theta.append(th)
        log.v.append(v)
        log.omega.append(om)
        log.source.append(sources[row[6]])
        log.d.append(_float(row[7], lineno))
        log.obstacle.append(False)
        log.false_window.append(False)
        log.latency_ms.append(0.0)
    return log


def write_manifest(samples: list[LabeledSample]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MANIFEST_HEADER)
    for s in samples:
        if any(ord(c) < 32 or ord(c) == 127 for c in s.path):
            raise ValueError(f"sample path {s.path!r} contains control characters")
        w.writerow([s.path, s.label.value, fmt_float(s.offset_d), fmt_float(s.sharpness),
                    fmt_float(s.timestamp)])
    return buf.getvalue()


def read_manifest(data: bytes | str) -> list[LabeledSample]:
    labels = {v.value: v for v in ViewClass}
    out = []
    for lineno, row in _rows(data, MANIFEST_HEADER):
        if row[1] not in labels:
            raise MalformedCSV(f"line {lineno}: unknown label {row[1]!r}")
        sharp = _float(row[3], lineno)
        if not sharp >= 0:
            raise MalformedCSV(f"line {lineno}: sharpness must be non-negative")
        out.append(LabeledSample(row[0], labels[row[1]], _float(row[2], lineno), sharp,
                                 _float(row[4], lineno)))
    return out


def frames_row(name: str, detected: str, x_w: float = math.nan, d: float = math.nan,
               v: float = math.nan, omega: float = math.nan, source: str = "") -> list[str]:
    return [name, detected, fmt_float(x_w), fmt_float(d), fmt_float(v), fmt_float(omega), source]


def write_frames_csv(rows: list[list[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FRAMES_HEADER)
    w.writerows(rows)
    return buf.getvalue()

