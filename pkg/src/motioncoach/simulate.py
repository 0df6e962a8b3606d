"""Synthetic learner motions and the labeled perturbation dataset.

Per joint and axis, the absolute frame-to-frame angle changes of an expert
motion are fitted with an exponential distribution. Learner-like errors are
then drawn as a randomly signed exponential term plus Gaussian jitter and
added to a per-sequence random subset of joints.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .core import AXES, N_AXES, N_FEATURES, N_JOINTS, MotionSequence, temporal_diff, wrap_angle
from .errors import InvalidInputError, ParseError, SkippedAxisError

DATASET_FORMAT = "motioncoach-dataset"
DATASET_VERSION = 1
TRAIN_FRACTION = 0.8
HIST_BINS = 72
SMOOTHING = 1e-9


@dataclass(frozen=True)
class SimulationConfig:
    joint_fraction: float = 0.25
    sigma_scale: float = 0.25

    def __post_init__(self):
        if not 0 < self.joint_fraction <= 1:
            raise InvalidInputError(f"joint_fraction must lie in (0, 1], got {self.joint_fraction}")
        if not (math.isfinite(self.sigma_scale) and self.sigma_scale >= 0):
            raise InvalidInputError(f"sigma_scale must be nonnegative, got {self.sigma_scale}")


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Exponential rates, Gaussian scales and skip mask, each shaped (24, 3).

    Skipped axes carry an infinite rate: the joint never moved there.
    """

    lam: np.ndarray
    sigma: np.ndarray
    skip: np.ndarray

    @property
    def mean_magnitude(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.where(self.skip, 0.0, 1.0 / self.lam)


def fit_noise_model(seq: MotionSequence, sigma_scale: float = 0.25) -> NoiseModel:
    """Maximum-likelihood exponential fit to |dtheta| per joint and axis."""
    mean_abs = np.abs(temporal_diff(seq)).mean(axis=0)
    skip = mean_abs == 0.0
    # a subnormal mean overflows to an infinite rate, which samples zero noise
    with np.errstate(divide="ignore", over="ignore"):
        lam = np.where(skip, np.inf, 1.0 / np.where(skip, 1.0, mean_abs))
    return NoiseModel(lam, sigma_scale * mean_abs, skip)


def sample_noise(
    model: NoiseModel,
    joint: int,
    axis: int,
    rng: np.random.Generator,
    size=None,
    *,
    signed: bool = True,
    gaussian: bool = True,
    exponential: bool = True,
):
    """Draw s * E + G with E ~ Exp(lambda), G ~ N(0, sigma^2), s a fair sign.

    ``signed=False`` fixes s = +1; ``gaussian=False`` drops G and
    ``exponential=False`` drops E. The switches exist for calibration checks.
    """
    if model.skip[joint, axis]:
        raise SkippedAxisError(f"joint {joint} axis {AXES[axis]} has no motion to model")
    e = rng.exponential(1.0 / model.lam[joint, axis], size) if exponential else 0.0
    g = rng.normal(0.0, model.sigma[joint, axis], size) if gaussian else 0.0
    s = rng.choice((-1.0, 1.0), size) if signed else 1.0
    return s * e + g


def n_selected(joint_fraction: float) -> int:
    return max(1, int(round(joint_fraction * N_JOINTS)))


def perturb(
    seq: MotionSequence,
    model: NoiseModel,
    joint_fraction: float,
    rng: np.random.Generator,
) -> tuple[MotionSequence, np.ndarray]:
    """Add sampled noise to a random joint subset on every frame.

    Returns the perturbed motion (rotations only) and a (frames, 24) label mask.
    """
    if not 0 < joint_fraction <= 1:
        raise InvalidInputError(f"joint_fraction must lie in (0, 1], got {joint_fraction}")
    T = seq.n_frames
    chosen = np.sort(rng.choice(N_JOINTS, size=n_selected(joint_fraction), replace=False))
    noise = np.zeros((T, N_JOINTS, N_AXES))
    lam = model.lam[chosen]
    active = ~model.skip[chosen]
    scale = np.where(active, 1.0 / np.where(active, lam, 1.0), 0.0)
    shape = (T, chosen.size, N_AXES)
    e = rng.exponential(1.0, shape) * scale
    g = rng.normal(0.0, 1.0, shape) * model.sigma[chosen]
    s = np.where(rng.integers(0, 2, shape) == 1, 1.0, -1.0)
    noise[:, chosen, :] = np.where(active, s * e + g, 0.0)
    labels = np.zeros((T, N_JOINTS), dtype=bool)
    labels[:, chosen] = True
    perturbed = MotionSequence(
        wrap_angle(seq.rotations + noise), None, seq.fps, seq.subject_height, seq.name
    )
    return perturbed, labels


class LabeledFrame(NamedTuple):
    x: np.ndarray
    y: np.ndarray


@dataclass(eq=False)
class SyntheticDataset:
    """Labeled frames split 80/20 by source sequence."""

    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    train_groups: np.ndarray
    test_groups: np.ndarray
    seed: int
    provenance: dict = field(default_factory=dict)

    def frames(self, split: str = "train") -> Iterator[LabeledFrame]:
        xs, ys = (self.train_x, self.train_y) if split == "train" else (self.test_x, self.test_y)
        for x, y in zip(xs, ys):
            yield LabeledFrame(x, y)

    @property
    def n_frames(self) -> int:
        return self.train_x.shape[0] + self.test_x.shape[0]

    def fingerprint(self) -> bytes:
        return b"".join(
            a.tobytes()
            for a in (self.train_x, self.train_y, self.test_x, self.test_y, self.train_groups, self.test_groups)
        )


def _feature_rows(original: MotionSequence, perturbed: MotionSequence) -> np.ndarray:
    x = wrap_angle(perturbed.rotations - original.rotations)
    return x.reshape(original.n_frames, N_FEATURES)


def simulate_motion(
    seq: MotionSequence, config: SimulationConfig, rng: np.random.Generator
) -> tuple[MotionSequence, np.ndarray, np.ndarray]:
    """Fit, perturb and featurize one motion: (perturbed, x rows, label rows)."""
    model = fit_noise_model(seq, config.sigma_scale)
    noisy, labels = perturb(seq, model, config.joint_fraction, rng)
    return noisy, _feature_rows(seq, noisy), labels


def motion_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, 0, index])


def split_sequences(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded sequence-level split; both sides keep at least one sequence."""
    order = np.random.default_rng([seed, 1]).permutation(n)
    n_train = min(max(int(round(TRAIN_FRACTION * n)), 1), n - 1)
    return np.sort(order[:n_train]), np.sort(order[n_train:])


def build_dataset(
    motions: list[MotionSequence],
    config: SimulationConfig | None = None,
    seed: int = 0,
) -> SyntheticDataset:
    if len(motions) < 2:
        raise InvalidInputError("build_dataset needs at least 2 motions")
    config = config or SimulationConfig()
    xs, ys = [], []
    for i, seq in enumerate(motions):
        _, x, y = simulate_motion(seq, config, motion_rng(seed, i))
        xs.append(x)
        ys.append(y)
    train_ids, test_ids = split_sequences(len(motions), seed)

    def stack(ids):
        if len(ids) == 0:
            return np.empty((0, N_FEATURES)), np.empty((0, N_JOINTS), dtype=bool), np.empty(0, dtype=np.int64)
        return (
            np.concatenate([xs[i] for i in ids]),
            np.concatenate([ys[i] for i in ids]),
            np.concatenate([np.full(len(xs[i]), i, dtype=np.int64) for i in ids]),
        )

    trx, try_, trg = stack(train_ids)
    tex, tey, teg = stack(test_ids)
    provenance = {
        "sources": [m.name or f"motion_{i}" for i, m in enumerate(motions)],
        "frames_per_source": [m.n_frames for m in motions],
        "train_sequences": [int(i) for i in train_ids],
        "test_sequences": [int(i) for i in test_ids],
        "config": asdict(config),
    }
    return SyntheticDataset(trx, try_, tex, tey, trg, teg, seed, provenance)


def simulate_corpus(
    motions: list[MotionSequence], config: SimulationConfig | None = None, seed: int = 0
) -> list[MotionSequence]:
    """Perturbed copies of each motion, using the same RNG streams as build_dataset."""
    config = config or SimulationConfig()
    return [simulate_motion(m, config, motion_rng(seed, i))[0] for i, m in enumerate(motions)]


# ---------------------------------------------------------------- dataset file


def save_dataset(ds: SyntheticDataset, path: str | os.PathLike) -> None:
    """JSON document; floats are written with full round-trip precision."""
    doc = {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "seed": ds.seed,
        "provenance": ds.provenance,
        "train": {
            "x": ds.train_x.tolist(),
            "y": ds.train_y.astype(int).tolist(),
            "groups": ds.train_groups.tolist(),
        },
        "test": {
            "x": ds.test_x.tolist(),
            "y": ds.test_y.astype(int).tolist(),
            "groups": ds.test_groups.tolist(),
        },
    }
    Path(path).write_text(json.dumps(doc, separators=(",", ":")) + "\n", encoding="utf-8")


def load_dataset(path: str | os.PathLike) -> SyntheticDataset:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"unreadable dataset: {exc}", str(path)) from None
    if doc.get("format") != DATASET_FORMAT or doc.get("version") != DATASET_VERSION:
        raise ParseError("not a version-1 motioncoach dataset", str(path))

    def arrays(part):
        x = np.asarray(part["x"], dtype=float).reshape(-1, N_FEATURES)
        y = np.asarray(part["y"], dtype=bool).reshape(-1, N_JOINTS)
        g = np.asarray(part["groups"], dtype=np.int64)
        return x, y, g

    trx, try_, trg = arrays(doc["train"])
    tex, tey, teg = arrays(doc["test"])
    return SyntheticDataset(trx, try_, tex, tey, trg, teg, int(doc["seed"]), doc["provenance"])


# ---------------------------------------------------------------- divergence


def kl_divergence(p_counts, q_counts, eps: float = SMOOTHING) -> float:
    p = np.asarray(p_counts, dtype=float) + eps
    q = np.asarray(q_counts, dtype=float) + eps
    p /= p.sum()
    q /= q.sum()
    return float(np.sum(p * np.log(p / q)))


def js_divergence(p_counts, q_counts, eps: float = SMOOTHING) -> float:
    p = np.asarray(p_counts, dtype=float) + eps
    q = np.asarray(q_counts, dtype=float) + eps
    p /= p.sum()
    q /= q.sum()
    m = 0.5 * (p + q)
    return float(0.5 * np.sum(p * np.log(p / m)) + 0.5 * np.sum(q * np.log(q / m)))


def angle_histogram(angles, bins: int = HIST_BINS) -> np.ndarray:
    """Counts over equal bins (lo, hi] covering (-180, 180]."""
    edges = np.linspace(-180.0, 180.0, bins + 1)
    idx = np.searchsorted(edges, np.ravel(angles), side="left") - 1
    return np.bincount(np.clip(idx, 0, bins - 1), minlength=bins)


def distribution_divergence(
    real: list[MotionSequence], sim: list[MotionSequence], bins: int = HIST_BINS
) -> dict:
    """KL(real||sim) and JS(real, sim) per axis and pooled over all axes."""
    if not real or not sim:
        raise InvalidInputError("distribution_divergence needs non-empty motion sets")
    r = np.concatenate([m.rotations for m in real])
    s = np.concatenate([m.rotations for m in sim])
    report = {}
    for a, name in enumerate(("X", "Y", "Z")):
        hp, hq = angle_histogram(r[..., a], bins), angle_histogram(s[..., a], bins)
        report[name] = {"kl": kl_divergence(hp, hq), "js": js_divergence(hp, hq)}
    hp, hq = angle_histogram(r, bins), angle_histogram(s, bins)
    report["All"] = {"kl": kl_divergence(hp, hq), "js": js_divergence(hp, hq)}
    return report


def format_divergence(report: dict) -> str:
    lines = [f"{'Axis':<10}{'KL(real||sim)':>15}{'JS(real, sim)':>15}"]
    for name, label in (("X", "X"), ("Y", "Y"), ("Z", "Z"), ("All", "All (XYZ)")):
        lines.append(f"{label:<10}{report[name]['kl']:>15.4f}{report[name]['js']:>15.4f}")
    return "\n".join(lines)
