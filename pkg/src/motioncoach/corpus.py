"""Procedurally generated expert motions and the bundled learner/expert fixture pair.

Motions are sums of per-joint sinusoids whose amplitudes follow the body
region. Positions are produced by the same generator (a rest pose plus
smooth displacements), never derived from the rotations.
"""
from __future__ import annotations

import os
from importlib import resources
from pathlib import Path

import numpy as np

from . import motion_io
from .core import JOINTS, N_AXES, N_JOINTS, MotionSequence, joint, wrap_angle

CORPUS_SEED = 20240501
CORPUS_SIZE = 24
FIXTURE_SEED = 7
FIXTURE_USER = "fixture_user.motion"
FIXTURE_REF = "fixture_ref.motion"

# rest pose for a 1.0 m tall subject: x to the subject's left, y up, z forward
_REST = np.array(
    [
        (0.00, 0.53, 0.00), (0.05, 0.48, 0.00), (-0.05, 0.48, 0.00), (0.00, 0.60, 0.00),
        (0.06, 0.28, 0.01), (-0.06, 0.28, 0.01), (0.00, 0.67, 0.00), (0.06, 0.05, 0.00),
        (-0.06, 0.05, 0.00), (0.00, 0.72, 0.00), (0.07, 0.01, 0.06), (-0.07, 0.01, 0.06),
        (0.00, 0.84, 0.00), (0.04, 0.80, 0.00), (-0.04, 0.80, 0.00), (0.00, 0.91, 0.02),
        (0.10, 0.80, 0.00), (-0.10, 0.80, 0.00), (0.12, 0.63, 0.00), (-0.12, 0.63, 0.00),
        (0.13, 0.48, 0.02), (-0.13, 0.48, 0.02), (0.13, 0.43, 0.03), (-0.13, 0.43, 0.03),
    ]
)

_AMPLITUDE = {"leg": 25.0, "arm": 35.0, "spine_torso": 8.0, "head": 10.0}
_REACH = {"leg": 0.05, "arm": 0.08, "spine_torso": 0.015, "head": 0.02}


def expert_motion(
    rng: np.random.Generator,
    n_frames: int,
    fps: float = 30.0,
    height: float = 1.7,
    name: str = "",
    frozen_prob: float = 0.08,
) -> MotionSequence:
    t = np.arange(n_frames) / fps
    rot = np.empty((n_frames, N_JOINTS, N_AXES))
    pos = np.empty((n_frames, N_JOINTS, N_AXES))
    for j in JOINTS:
        amp_scale = _AMPLITUDE[j.region]
        for a in range(N_AXES):
            base = rng.uniform(-20.0, 20.0)
            if rng.random() < frozen_prob:
                rot[:, j.index, a] = base
                continue
            f1, f2 = rng.uniform(0.3, 1.2), rng.uniform(1.2, 2.5)
            p1, p2 = rng.uniform(0, 2 * np.pi, 2)
            a1 = amp_scale * rng.uniform(0.3, 1.0)
            a2 = 0.3 * a1 * rng.uniform(0.0, 1.0)
            rot[:, j.index, a] = base + a1 * np.sin(2 * np.pi * f1 * t + p1) + a2 * np.sin(2 * np.pi * f2 * t + p2)
        reach = _REACH[j.region]
        for a in range(N_AXES):
            f, p = rng.uniform(0.3, 1.2), rng.uniform(0, 2 * np.pi)
            pos[:, j.index, a] = _REST[j.index, a] + reach * rng.uniform(0.3, 1.0) * np.sin(2 * np.pi * f * t + p)
    return MotionSequence(wrap_angle(rot), pos * height, fps=fps, subject_height=height, name=name)


def corpus(n: int = CORPUS_SIZE, seed: int = CORPUS_SEED, min_frames: int = 100, max_frames: int = 180):
    """The deterministic expert corpus used by the simulation and forest checks."""
    out = []
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        frames = int(rng.integers(min_frames, max_frames + 1))
        height = float(rng.uniform(1.55, 1.95))
        out.append(expert_motion(rng, frames, height=round(height, 3), name=f"expert_{i:03d}"))
    return out


def write_corpus(directory: str | os.PathLike, n: int = CORPUS_SIZE, seed: int = CORPUS_SEED) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    for m in corpus(n, seed):
        p = d / f"{m.name}{motion_io.SUFFIX}"
        motion_io.save(m, p)
        paths.append(p)
    return paths


def _resample(arr: np.ndarray, src_times: np.ndarray) -> np.ndarray:
    """Linear interpolation of (frames, 24, 3) data at fractional frame times."""
    lo = np.clip(np.floor(src_times).astype(int), 0, arr.shape[0] - 1)
    hi = np.clip(lo + 1, 0, arr.shape[0] - 1)
    w = (src_times - lo)[:, None, None]
    return arr[lo] * (1 - w) + arr[hi] * w


def fixture_pair(
    seed: int = FIXTURE_SEED,
    ref_frames: int = 240,
    user_frames: int = 300,
    offset_joint: str = "left_knee",
    angle_offset: float = 20.0,
    position_offset: float = 0.15,
):
    """A 300-frame learner recording and its 240-frame expert reference.

    The learner idles before and after the move, performs it with a varying
    tempo, is taller than the expert, and carries a constant rotation and
    position error on ``offset_joint``.
    """
    rng = np.random.default_rng([seed])
    ref = expert_motion(rng, ref_frames, height=1.70, name="fixture_ref", frozen_prob=0.0)
    pre = 24
    post = 20
    core_len = user_frames - pre - post
    tau = np.linspace(0.0, 1.0, core_len)
    warp = tau + 0.06 * np.sin(2 * np.pi * tau)
    src = warp * (ref_frames - 1)
    rot = _resample(ref.rotations, src)
    pos = _resample(ref.positions / ref.subject_height, src)

    def jitter(n, s):
        return rng.normal(0.0, s, (n, N_JOINTS, N_AXES))

    rot = np.concatenate(
        [rot[:1] + jitter(pre, 0.5), rot, rot[-1:] + jitter(post, 0.5)]
    )
    pos = np.concatenate([pos[:1] + jitter(pre, 0.002), pos, pos[-1:] + jitter(post, 0.002)])
    j = joint(offset_joint).index
    rot[:, j, 0] += angle_offset
    pos[:, j, 0] += position_offset
    height = 1.85
    user = MotionSequence(wrap_angle(rot), pos * height, fps=30.0, subject_height=height, name="fixture_user")
    return user, ref


def bundled_fixture_paths() -> tuple[Path, Path]:
    base = resources.files("motioncoach") / "data"
    return Path(str(base / FIXTURE_USER)), Path(str(base / FIXTURE_REF))


def load_fixture_pair() -> tuple[MotionSequence, MotionSequence]:
    user_path, ref_path = bundled_fixture_paths()
    return motion_io.load(user_path), motion_io.load(ref_path)


def write_fixture_pair(directory: str | os.PathLike) -> tuple[Path, Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    user, ref = fixture_pair()
    up, rp = d / FIXTURE_USER, d / FIXTURE_REF
    motion_io.save(user, up)
    motion_io.save(ref, rp)
    return up, rp
