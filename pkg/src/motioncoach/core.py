"""Motion data model, SMPL joint taxonomy and angle geometry.

Rotations are stored as per-joint Euler triples in degrees, intrinsic
x -> y -> z order, every angle wrapped to (-180, 180].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import InsufficientFramesError, InvalidInputError, MissingDataError

N_JOINTS = 24
N_AXES = 3
N_FEATURES = N_JOINTS * N_AXES
AXES = ("x", "y", "z")
AXIS_ORDER = "xyz"
DEFAULT_FPS = 30.0
REFERENCE_HEIGHT = 1.0


class JointId(NamedTuple):
    index: int
    name: str
    side: str
    region: str

    @property
    def label(self) -> str:
        """Human-readable name, e.g. ``left knee``."""
        return self.name.replace("_", " ")


_JOINT_TABLE = [
    ("pelvis", "center", "spine_torso"),
    ("left_hip", "left", "leg"),
    ("right_hip", "right", "leg"),
    ("spine1", "center", "spine_torso"),
    ("left_knee", "left", "leg"),
    ("right_knee", "right", "leg"),
    ("spine2", "center", "spine_torso"),
    ("left_ankle", "left", "leg"),
    ("right_ankle", "right", "leg"),
    ("spine3", "center", "spine_torso"),
    ("left_foot", "left", "leg"),
    ("right_foot", "right", "leg"),
    ("neck", "center", "head"),
    ("left_collar", "left", "arm"),
    ("right_collar", "right", "arm"),
    ("head", "center", "head"),
    ("left_shoulder", "left", "arm"),
    ("right_shoulder", "right", "arm"),
    ("left_elbow", "left", "arm"),
    ("right_elbow", "right", "arm"),
    ("left_wrist", "left", "arm"),
    ("right_wrist", "right", "arm"),
    ("left_hand", "left", "arm"),
    ("right_hand", "right", "arm"),
]

JOINTS: tuple[JointId, ...] = tuple(
    JointId(i, name, side, region) for i, (name, side, region) in enumerate(_JOINT_TABLE)
)
JOINT_NAMES: tuple[str, ...] = tuple(j.name for j in JOINTS)
_BY_NAME = {j.name: j for j in JOINTS}


def joint(key: int | str) -> JointId:
    """Look up a joint by index or canonical name."""
    if isinstance(key, str):
        try:
            return _BY_NAME[key]
        except KeyError:
            raise InvalidInputError(f"unknown joint name {key!r}") from None
    if not 0 <= key < N_JOINTS:
        raise InvalidInputError(f"joint index {key} out of range")
    return JOINTS[key]


def wrap_angle(a):
    """Wrap degrees into (-180, 180]. Accepts scalars or arrays."""
    arr = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("angle must be finite")
    # in-range values pass through untouched so wrapping never costs an ulp
    inside = (arr > -180.0) & (arr <= 180.0)
    out = np.where(inside, arr, 180.0 - np.mod(180.0 - arr, 360.0))
    # np.mod may round up to exactly 360 for tiny negative remainders
    out = np.where(out <= -180.0, out + 360.0, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class MotionSequence:
    """A (frames, 24, 3) Euler-angle sequence with optional joint positions.

    Arrays are copied on construction and made read-only.
    """

    rotations: np.ndarray
    positions: np.ndarray | None = None
    fps: float = DEFAULT_FPS
    subject_height: float | None = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        rot = np.asarray(self.rotations, dtype=float)
        if rot.ndim != 3 or rot.shape[1:] != (N_JOINTS, N_AXES) or rot.shape[0] == 0:
            raise InvalidInputError(
                f"rotations must have shape (frames>=1, {N_JOINTS}, {N_AXES}), got {rot.shape}"
            )
        object.__setattr__(self, "rotations", _frozen(wrap_angle(rot)))
        if self.positions is not None:
            pos = np.asarray(self.positions, dtype=float)
            if pos.shape != rot.shape:
                raise InvalidInputError(
                    f"positions shape {pos.shape} does not match rotations {rot.shape}"
                )
            if not np.all(np.isfinite(pos)):
                raise InvalidInputError("positions must be finite")
            object.__setattr__(self, "positions", _frozen(pos))
        fps = float(self.fps)
        if not (math.isfinite(fps) and fps > 0):
            raise InvalidInputError(f"fps must be positive, got {self.fps}")
        object.__setattr__(self, "fps", fps)
        if self.subject_height is not None:
            h = float(self.subject_height)
            if not (math.isfinite(h) and h > 0):
                raise InvalidInputError(f"subject_height must be positive, got {h}")
            object.__setattr__(self, "subject_height", h)

    def __len__(self) -> int:
        return self.rotations.shape[0]

    @property
    def n_frames(self) -> int:
        return self.rotations.shape[0]

    @property
    def has_positions(self) -> bool:
        return self.positions is not None

    def slice(self, start: int, stop: int) -> "MotionSequence":
        pos = None if self.positions is None else self.positions[start:stop]
        return MotionSequence(self.rotations[start:stop], pos, self.fps, self.subject_height, self.name)

    def replace(self, **changes) -> "MotionSequence":
        fields = dict(
            rotations=self.rotations,
            positions=self.positions,
            fps=self.fps,
            subject_height=self.subject_height,
            name=self.name,
        )
        fields.update(changes)
        return MotionSequence(**fields)

    def equals(self, other: "MotionSequence") -> bool:
        if not isinstance(other, MotionSequence):
            return False
        if (other.positions is None) != (self.positions is None):
            return False
        same_pos = self.positions is None or np.array_equal(self.positions, other.positions)
        return (
            np.array_equal(self.rotations, other.rotations)
            and same_pos
            and self.fps == other.fps
            and self.subject_height == other.subject_height
        )


def temporal_diff(seq: MotionSequence) -> np.ndarray:
    """Shortest-arc frame-to-frame differences, shape (frames-1, 24, 3)."""
    if seq.n_frames < 2:
        raise InsufficientFramesError("temporal_diff needs at least 2 frames")
    return wrap_angle(np.diff(seq.rotations, axis=0))


def normalize_by_height(seq: MotionSequence, height: float) -> MotionSequence:
    """Scale positions so a subject of ``height`` meters maps onto the 1.0 m reference."""
    if seq.positions is None:
        raise MissingDataError("normalize_by_height requires joint positions")
    if not (math.isfinite(height) and height > 0):
        raise InvalidInputError(f"height must be positive, got {height}")
    scale = REFERENCE_HEIGHT / height
    return seq.replace(positions=seq.positions * scale, subject_height=REFERENCE_HEIGHT)


def euler_to_matrix(angles) -> np.ndarray:
    """Rotation matrix for an intrinsic x-y-z Euler triple in degrees.

    Works on any leading batch shape: (..., 3) -> (..., 3, 3).
    """
    a = np.radians(np.asarray(angles, dtype=float))
    cx, cy, cz = np.cos(a[..., 0]), np.cos(a[..., 1]), np.cos(a[..., 2])
    sx, sy, sz = np.sin(a[..., 0]), np.sin(a[..., 1]), np.sin(a[..., 2])
    # Rx @ Ry @ Rz expanded
    r = np.empty(a.shape[:-1] + (3, 3))
    r[..., 0, 0] = cy * cz
    r[..., 0, 1] = -cy * sz
    r[..., 0, 2] = sy
    r[..., 1, 0] = cx * sz + sx * sy * cz
    r[..., 1, 1] = cx * cz - sx * sy * sz
    r[..., 1, 2] = -sx * cy
    r[..., 2, 0] = sx * sz - cx * sy * cz
    r[..., 2, 1] = sx * cz + cx * sy * sz
    r[..., 2, 2] = cx * cy
    return r


def rotation_geodesic_angle(a, b) -> np.ndarray | float:
    """Geodesic distance in degrees between two Euler triples (or batches of them)."""
    ea = np.asarray(a, dtype=float)
    eb = np.asarray(b, dtype=float)
    if not (np.all(np.isfinite(ea)) and np.all(np.isfinite(eb))):
        raise InvalidInputError("Euler triples must be finite")
    if ea.shape[-1] != 3 or eb.shape[-1] != 3:
        raise InvalidInputError("Euler triples must have a trailing dimension of 3")
    ra = euler_to_matrix(ea)
    rb = euler_to_matrix(eb)
    rel = np.swapaxes(ra, -1, -2) @ rb
    cos = (np.trace(rel, axis1=-2, axis2=-1) - 1.0) / 2.0
    # atan2 keeps precision near 0 and 180 where arccos is ill-conditioned
    skew = np.stack(
        [
            rel[..., 2, 1] - rel[..., 1, 2],
            rel[..., 0, 2] - rel[..., 2, 0],
            rel[..., 1, 0] - rel[..., 0, 1],
        ],
        axis=-1,
    )
    sin = np.linalg.norm(skew, axis=-1) / 2.0
    out = np.degrees(np.arctan2(sin, cos))
    if np.ndim(out) == 0:
        return float(out)
    return out
