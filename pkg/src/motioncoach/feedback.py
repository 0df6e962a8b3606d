"""Segment timing scores, spatial deviation markers and segmented pose matching."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .alignment import AlignmentResult
from .core import JOINTS, N_JOINTS, JointId, MotionSequence, rotation_geodesic_angle
from .errors import InvalidConfigError, InvalidInputError, MissingDataError

ANGULAR_TOLERANCE = 30.0
POSITION_TOLERANCE = 0.1
ADVANCE_FRACTION = 0.75
SEGMENT_COUNTS = (4, 8)

# Threshold comparisons absorb float noise this small, so a value that is
# mathematically on the boundary is treated as on the boundary.
BOUNDARY_EPS = 1e-9
_SCORE_DECIMALS = 9

LABELS = (
    (90.0, "Perfect"),
    (80.0, "Excellent"),
    (70.0, "Great"),
    (60.0, "Good"),
    (50.0, "Imprecise"),
)
MISS = "Miss"


@dataclass(frozen=True)
class SegmentScore:
    segment_index: int
    t_ideal: float
    t_actual: float
    score: float
    label: str

    def to_record(self) -> dict:
        return {
            "segment_index": self.segment_index,
            "t_ideal": self.t_ideal,
            "t_actual": self.t_actual,
            "score": self.score,
            "label": self.label,
        }


@dataclass(frozen=True)
class JointDeviation:
    joint: JointId
    frame: int
    positional_error: float
    angular_error: float
    flagged: bool

    def to_record(self) -> dict:
        return {
            "joint": self.joint.name,
            "frame": self.frame,
            "positional_error": self.positional_error,
            "angular_error": self.angular_error,
            "flagged": self.flagged,
        }


@dataclass(frozen=True)
class PoseMatchVerdict:
    per_joint_aligned: tuple[bool, ...]
    aligned_fraction: float
    advance: bool

    def to_record(self) -> dict:
        return {
            "per_joint_aligned": list(self.per_joint_aligned),
            "aligned_fraction": self.aligned_fraction,
            "advance": self.advance,
        }


def segment_boundaries(ref_length: int, k: int) -> list[tuple[int, int]]:
    """Split [0, ref_length) into k near-equal half-open ranges, larger ones first."""
    if k not in SEGMENT_COUNTS:
        raise InvalidConfigError(f"segment count must be one of {SEGMENT_COUNTS}, got {k}")
    if ref_length < k:
        raise InvalidInputError(f"reference of {ref_length} frames cannot form {k} segments")
    base, extra = divmod(ref_length, k)
    out = []
    lo = 0
    for s in range(k):
        size = base + (1 if s < extra else 0)
        out.append((lo, lo + size))
        lo += size
    return out


def segment_durations(
    alignment: AlignmentResult,
    boundaries: list[tuple[int, int]],
    fps_user: float,
    fps_ref: float,
) -> tuple[list[float], list[float]]:
    """Ideal and actual seconds per segment, mapping learner time through the path.

    A learner frame matched to several segments counts toward the earliest.
    """
    if not alignment.path:
        raise InvalidInputError("alignment path is empty")
    seg_of = {}
    for s, (lo, hi) in enumerate(boundaries):
        for e in range(lo, hi):
            seg_of[e] = s
    first_seg: dict[int, int] = {}
    for u, e in alignment.path:
        s = seg_of.get(e)
        if s is None:
            continue
        if u not in first_seg or s < first_seg[u]:
            first_seg[u] = s
    counts = [0] * len(boundaries)
    for s in first_seg.values():
        counts[s] += 1
    t_ideal = [(hi - lo) / fps_ref for lo, hi in boundaries]
    t_actual = [c / fps_user for c in counts]
    return t_ideal, t_actual


def timing_score(t_ideal: float, t_actual: float) -> float:
    if not (math.isfinite(t_ideal) and t_ideal > 0):
        raise InvalidInputError(f"t_ideal must be positive, got {t_ideal}")
    if not (math.isfinite(t_actual) and t_actual >= 0):
        raise InvalidInputError(f"t_actual must be nonnegative, got {t_actual}")
    raw = max(0.0, 100.0 - abs((t_ideal - t_actual) / t_ideal) * 100.0)
    # 100 - |1 - 1.1| * 100 evaluates to 89.99999999999999 in binary floats
    return round(raw, _SCORE_DECIMALS) + 0.0


def score_label(score: float) -> str:
    for lower, name in LABELS:
        if score >= lower:
            return name
    return MISS


def hit_judgement(t_ideal: float, t_actual: float, segment_index: int = 0) -> SegmentScore:
    score = timing_score(t_ideal, t_actual)
    return SegmentScore(segment_index, t_ideal, t_actual, score, score_label(score))


def score_segments(
    alignment: AlignmentResult, user: MotionSequence, ref: MotionSequence, k: int = 4
) -> list[SegmentScore]:
    bounds = segment_boundaries(len(ref), k)
    ideal, actual = segment_durations(alignment, bounds, user.fps, ref.fps)
    return [hit_judgement(ti, ta, s) for s, (ti, ta) in enumerate(zip(ideal, actual))]


def _require_positions(*seqs):
    for s in seqs:
        if s.positions is None:
            raise MissingDataError("joint positions are required")


def spatial_diff(
    alignment: AlignmentResult,
    user: MotionSequence,
    ref: MotionSequence,
    tolerance: float = POSITION_TOLERANCE,
) -> list[JointDeviation]:
    """Per path pair and joint: positional error (flag source) and angular error.

    Both sequences are expected to be height-normalized already.
    """
    _require_positions(user, ref)
    path = np.asarray(alignment.path, dtype=np.int64)
    ui, ei = path[:, 0], path[:, 1]
    pos_err = np.linalg.norm(user.positions[ui] - ref.positions[ei], axis=-1)
    ang_err = rotation_geodesic_angle(user.rotations[ui], ref.rotations[ei])
    flags = pos_err > tolerance + BOUNDARY_EPS
    out = []
    for p in range(path.shape[0]):
        e = int(ei[p])
        for j in range(N_JOINTS):
            out.append(
                JointDeviation(JOINTS[j], e, float(pos_err[p, j]), float(ang_err[p, j]), bool(flags[p, j]))
            )
    return out


def flagged_by_frame(deviations: list[JointDeviation]) -> list[dict]:
    """Compact listing: every expert frame with at least one red joint."""
    by_frame: dict[int, list[str]] = {}
    for d in deviations:
        if d.flagged:
            names = by_frame.setdefault(d.frame, [])
            if d.joint.name not in names:
                names.append(d.joint.name)
    return [{"frame": f, "joints": by_frame[f]} for f in sorted(by_frame)]


def pose_match_step(
    user_rotations,
    user_positions,
    ref_rotations,
    ref_positions,
    angular_tolerance: float = ANGULAR_TOLERANCE,
    position_tolerance: float = POSITION_TOLERANCE,
    advance_fraction: float = ADVANCE_FRACTION,
) -> PoseMatchVerdict:
    """Check one learner frame against one expert frame (positions height-normalized)."""
    if user_positions is None or ref_positions is None:
        raise MissingDataError("pose matching needs joint positions")
    ur = np.asarray(user_rotations, dtype=float).reshape(N_JOINTS, 3)
    rr = np.asarray(ref_rotations, dtype=float).reshape(N_JOINTS, 3)
    up = np.asarray(user_positions, dtype=float).reshape(N_JOINTS, 3)
    rp = np.asarray(ref_positions, dtype=float).reshape(N_JOINTS, 3)
    ang = rotation_geodesic_angle(ur, rr)
    pos = np.linalg.norm(up - rp, axis=-1)
    aligned = (ang < angular_tolerance - BOUNDARY_EPS) & (pos < position_tolerance - BOUNDARY_EPS)
    fraction = int(aligned.sum()) / N_JOINTS
    return PoseMatchVerdict(tuple(bool(a) for a in aligned), fraction, fraction >= advance_fraction)


def pose_match_frames(
    user: MotionSequence,
    ref: MotionSequence,
    user_frame: int,
    ref_frame: int,
    **tolerances,
) -> PoseMatchVerdict:
    _require_positions(user, ref)
    return pose_match_step(
        user.rotations[user_frame],
        user.positions[user_frame],
        ref.rotations[ref_frame],
        ref.positions[ref_frame],
        **tolerances,
    )
