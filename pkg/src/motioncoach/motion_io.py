"""Text motion file format.

Layout::

    #motioncoach-motion 1
    fps 30
    axis_order xyz
    subject_height 1.75        (or ``none``)
    joints pelvis left_hip ... right_hand
    positions yes|no
    frames 300
    <one line per frame: 72 rotations, then 72 positions when present>

Values are written with 9 significant digits. Writing a parsed file
reproduces it byte for byte.
"""
from __future__ import annotations

import io
import math
import os
from pathlib import Path

import numpy as np

from .core import AXIS_ORDER, JOINT_NAMES, N_AXES, N_FEATURES, N_JOINTS, MotionSequence
from .errors import InvalidInputError, ParseError

MAGIC = "#motioncoach-motion"
FORMAT_VERSION = 1
SUFFIX = ".motion"


def _fmt(v: float) -> str:
    s = f"{v:.9g}"
    if s == "-0":
        return "0"
    return s


def _fmt_angle(v: float) -> str:
    s = _fmt(v)
    # rounding can land on -180, which lies outside (-180, 180]
    return "180" if s == "-180" else s


def dumps(seq: MotionSequence) -> str:
    out = io.StringIO()
    out.write(f"{MAGIC} {FORMAT_VERSION}\n")
    out.write(f"fps {seq.fps!r}\n")
    out.write(f"axis_order {AXIS_ORDER}\n")
    height = "none" if seq.subject_height is None else repr(seq.subject_height)
    out.write(f"subject_height {height}\n")
    out.write("joints " + " ".join(JOINT_NAMES) + "\n")
    out.write(f"positions {'yes' if seq.has_positions else 'no'}\n")
    out.write(f"frames {seq.n_frames}\n")
    rot = seq.rotations.reshape(seq.n_frames, N_FEATURES)
    pos = None if seq.positions is None else seq.positions.reshape(seq.n_frames, N_FEATURES)
    for t in range(seq.n_frames):
        fields = [_fmt_angle(v) for v in rot[t]]
        if pos is not None:
            fields.extend(_fmt(v) for v in pos[t])
        out.write(" ".join(fields) + "\n")
    return out.getvalue()


def _header_value(lines, lineno, key, path):
    if lineno >= len(lines):
        raise ParseError(f"missing '{key}' header", path, lineno + 1)
    parts = lines[lineno].split()
    if not parts or parts[0] != key:
        raise ParseError(f"expected '{key}' header", path, lineno + 1)
    return parts[1:]


def loads(text: str, path: str | None = None, name: str = "") -> MotionSequence:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or not lines[0].startswith(MAGIC):
        raise ParseError("not a motion file (bad magic line)", path, 1)
    try:
        version = int(lines[0].split()[1])
    except (IndexError, ValueError):
        raise ParseError("unreadable format version", path, 1) from None
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported format version {version}", path, 1)

    def single(lineno, key):
        vals = _header_value(lines, lineno, key, path)
        if len(vals) != 1:
            raise ParseError(f"'{key}' expects one value", path, lineno + 1)
        return vals[0]

    try:
        fps = float(single(1, "fps"))
    except ValueError:
        raise ParseError("fps is not a number", path, 2) from None
    if single(2, "axis_order") != AXIS_ORDER:
        raise ParseError(f"only axis order '{AXIS_ORDER}' is supported", path, 3)
    raw_h = single(3, "subject_height")
    try:
        height = None if raw_h == "none" else float(raw_h)
    except ValueError:
        raise ParseError("subject_height is not a number", path, 4) from None
    if tuple(_header_value(lines, 4, "joints", path)) != JOINT_NAMES:
        raise ParseError("joint list does not match the 24-joint layout", path, 5)
    flag = single(5, "positions")
    if flag not in ("yes", "no"):
        raise ParseError("positions must be 'yes' or 'no'", path, 6)
    has_pos = flag == "yes"
    try:
        n_frames = int(single(6, "frames"))
    except ValueError:
        raise ParseError("frames is not an integer", path, 7) from None
    body = lines[7:]
    if len(body) != n_frames:
        raise ParseError(f"expected {n_frames} frame records, found {len(body)}", path, 8 + min(len(body), n_frames))
    width = N_FEATURES * (2 if has_pos else 1)
    data = np.empty((n_frames, width))
    for t, line in enumerate(body):
        parts = line.split()
        if len(parts) != width:
            raise ParseError(f"expected {width} values, found {len(parts)}", path, 8 + t)
        try:
            row = [float(p) for p in parts]
        except ValueError:
            raise ParseError("non-numeric value", path, 8 + t) from None
        if not all(math.isfinite(v) for v in row):
            raise ParseError("non-finite value", path, 8 + t)
        data[t] = row
    rot = data[:, :N_FEATURES].reshape(n_frames, N_JOINTS, N_AXES)
    pos = data[:, N_FEATURES:].reshape(n_frames, N_JOINTS, N_AXES) if has_pos else None
    try:
        return MotionSequence(rot, pos, fps=fps, subject_height=height, name=name)
    except InvalidInputError as exc:
        raise ParseError(str(exc), path) from None


def load(path: str | os.PathLike) -> MotionSequence:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror}", str(p)) from None
    return loads(text, path=str(p), name=p.stem)


def save(seq: MotionSequence, path: str | os.PathLike) -> None:
    Path(path).write_text(dumps(seq), encoding="utf-8")


def load_dir(directory: str | os.PathLike) -> list[MotionSequence]:
    """Every ``*.motion`` file in a directory, sorted by file name."""
    d = Path(directory)
    files = sorted(d.glob(f"*{SUFFIX}"))
    if not files:
        raise InvalidInputError(f"no {SUFFIX} files in {d}")
    return [load(f) for f in files]
