from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from motioncoach import simulate
from motioncoach.core import MotionSequence, wrap_angle
from motioncoach.errors import InsufficientFramesError, InvalidInputError, SkippedAxisError
from motioncoach.simulate import (
    SimulationConfig,
    angle_histogram,
    build_dataset,
    distribution_divergence,
    fit_noise_model,
    js_divergence,
    kl_divergence,
    perturb,
    sample_noise,
)
from conftest import random_motion


def _axis_motion(values, joint=2, axis=1):
    rot = np.zeros((len(values), 24, 3))
    rot[:, joint, axis] = values
    return MotionSequence(rot)


def test_lambda_examples():
    m = fit_noise_model(_axis_motion([0.0, 2.0, 0.0, 2.0]))
    assert m.lam[2, 1] == 0.5
    assert m.sigma[2, 1] == 0.5
    m = fit_noise_model(_axis_motion([0.0, 1.0, 4.0]))
    assert m.lam[2, 1] == 0.5
    assert m.skip[0, 0] and not m.skip[2, 1]
    assert m.skip.sum() == 71


def test_fit_needs_two_frames():
    with pytest.raises(InsufficientFramesError):
        fit_noise_model(MotionSequence(np.zeros((1, 24, 3))))


def test_skipped_axis_never_sampled_and_never_noised(rng):
    m = fit_noise_model(_axis_motion([0.0, 5.0, 1.0]))
    with pytest.raises(SkippedAxisError):
        sample_noise(m, 0, 0, rng)
    seq = _axis_motion([0.0, 5.0, 1.0])
    noisy, _ = perturb(seq, m, 1.0, rng)
    diff = np.asarray(noisy.rotations) - np.asarray(seq.rotations)
    mask = np.ones((24, 3), bool)
    mask[2, 1] = False
    assert np.all(diff[:, mask] == 0)


def _model(rng):
    return fit_noise_model(random_motion(rng, 50, scale=20.0))


def test_exponential_mean_monte_carlo(rng):
    m = _model(rng)
    draws = sample_noise(m, 3, 0, np.random.default_rng(1), 100_000, signed=False, gaussian=False)
    assert np.all(draws >= 0)
    assert abs(draws.mean() - 1 / m.lam[3, 0]) <= 0.02 / m.lam[3, 0]


def test_signed_mean_monte_carlo(rng):
    m = _model(rng)
    draws = sample_noise(m, 5, 2, np.random.default_rng(2), 100_000)
    assert abs(draws.mean()) <= 3 * draws.std() / math.sqrt(draws.size)


def test_gaussian_variance_monte_carlo(rng):
    m = _model(rng)
    g = sample_noise(m, 7, 1, np.random.default_rng(3), 100_000, exponential=False)
    assert abs(g.var() / m.sigma[7, 1] ** 2 - 1) < 0.05


def test_perturb_labels_and_untouched_joints(rng):
    seq = random_motion(rng, 30, scale=20.0)
    m = fit_noise_model(seq)
    noisy, labels = perturb(seq, m, 0.25, np.random.default_rng(9))
    chosen = np.flatnonzero(labels[0])
    assert chosen.size == 6
    assert np.all(labels == labels[0])
    diff = wrap_angle(np.asarray(noisy.rotations) - np.asarray(seq.rotations))
    others = np.setdiff1d(np.arange(24), chosen)
    assert np.all(diff[:, others] == 0)
    assert np.all(diff[:, chosen] != 0)
    assert np.all((noisy.rotations > -180) & (noisy.rotations <= 180))


def test_perturb_deterministic(rng):
    seq = random_motion(rng, 20)
    m = fit_noise_model(seq)
    a = perturb(seq, m, 0.25, np.random.default_rng(4))
    b = perturb(seq, m, 0.25, np.random.default_rng(4))
    assert a[0].rotations.tobytes() == b[0].rotations.tobytes()
    assert np.array_equal(a[1], b[1])


def test_perturb_fraction_bounds(rng):
    seq = random_motion(rng, 5)
    m = fit_noise_model(seq)
    assert perturb(seq, m, 0.01, rng)[1][0].sum() == 1
    assert perturb(seq, m, 1.0, rng)[1][0].sum() == 24
    with pytest.raises(InvalidInputError):
        perturb(seq, m, 0.0, rng)


def test_build_dataset_split_and_conservation(rng):
    motions = [random_motion(rng, n, scale=30.0) for n in range(10, 20)]
    ds = build_dataset(motions, seed=3)
    assert len(ds.provenance["train_sequences"]) == 8
    assert len(ds.provenance["test_sequences"]) == 2
    assert ds.n_frames == sum(m.n_frames for m in motions)
    assert set(ds.train_groups).isdisjoint(ds.test_groups)
    assert build_dataset(motions, seed=3).fingerprint() == ds.fingerprint()
    assert build_dataset(motions, seed=4).fingerprint() != ds.fingerprint()
    with pytest.raises(InvalidInputError):
        build_dataset(motions[:1])


def test_labeled_frames_have_zero_features_on_unlabeled_joints(dataset):
    for split in ("train", "test"):
        for x, y in dataset.frames(split):
            assert np.all(x.reshape(24, 3)[~y] == 0)
            assert y.sum() == 6


@given(st.integers(0, 2**32 - 1), st.floats(0.04, 1.0))
def test_labeled_frame_invariant_property(seed, fraction):
    r = np.random.default_rng(seed)
    seq = random_motion(r, 4, scale=40.0)
    _, x, y = simulate.simulate_motion(seq, SimulationConfig(fraction), r)
    assert np.all(x.reshape(-1, 24, 3)[~y] == 0)


def test_dataset_file_round_trip(dataset, tmp_path):
    simulate.save_dataset(dataset, tmp_path / "d.json")
    back = simulate.load_dataset(tmp_path / "d.json")
    assert back.fingerprint() == dataset.fingerprint()
    assert back.provenance == dataset.provenance


@given(st.integers(0, 2**32 - 1), st.integers(2, 8), st.floats(0.1, 5.0))
def test_fit_noise_model_scale_consistent(seed, frames, c):
    r = np.random.default_rng(seed)
    # angles on a 1e-6 grid, with some frozen axes, keep differences well inside
    # the normal float range
    rot = np.round(r.uniform(-17, 17, (frames, 24, 3)), 6)
    rot[:, r.integers(0, 24, 3), r.integers(0, 3)] = 7.0
    base = fit_noise_model(MotionSequence(rot))
    scaled = fit_noise_model(MotionSequence(rot * c))
    # |c * dtheta| stays below 180, so wrapping never interferes
    assert np.array_equal(base.skip, scaled.skip)
    assert np.allclose(scaled.lam[~base.skip] * c, base.lam[~base.skip], rtol=1e-9)


def test_divergence_examples():
    p = np.array([5, 0])
    q = np.array([0, 5])
    assert js_divergence(p, q) == pytest.approx(math.log(2), abs=1e-6)
    assert js_divergence(p, q) == js_divergence(q, p)
    assert kl_divergence(p, p) == 0 and js_divergence(p, p) == 0


def test_identical_sets_have_zero_divergence(expert_corpus):
    rep = distribution_divergence(expert_corpus[:3], expert_corpus[:3])
    assert set(rep) == {"X", "Y", "Z", "All"}
    assert all(v == {"kl": 0.0, "js": 0.0} for v in rep.values())
    with pytest.raises(InvalidInputError):
        distribution_divergence([], expert_corpus[:1])


def test_histogram_bins_are_left_open():
    h = angle_histogram(np.array([-180 + 1e-9, -175.0, 180.0, 175.0 + 1e-9]), 72)
    assert h[0] == 2 and h[71] == 2 and h.sum() == 4


def _kl_oracle(p, q, eps=1e-9):
    p = [v + eps for v in p]
    q = [v + eps for v in q]
    sp, sq = sum(p), sum(q)
    return sum((a / sp) * math.log((a / sp) / (b / sq)) for a, b in zip(p, q))


@given(st.lists(st.integers(0, 50), min_size=2, max_size=72).flatmap(
    lambda p: st.tuples(st.just(p), st.lists(st.integers(0, 50), min_size=len(p), max_size=len(p)))
))
def test_divergence_bounds(pq):
    p, q = pq
    kl = kl_divergence(p, q)
    js = js_divergence(p, q)
    assert kl >= -1e-12
    assert -1e-12 <= js <= math.log(2) + 1e-12
    assert kl == pytest.approx(_kl_oracle(p, q), rel=1e-9, abs=1e-12)
    assert js == pytest.approx(js_divergence(q, p), abs=1e-12)
