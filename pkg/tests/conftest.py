from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from motioncoach import corpus, forest, simulate  # noqa: E402
from motioncoach.core import MotionSequence  # noqa: E402

settings.register_profile(
    "invariants",
    max_examples=1000,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("invariants")


def random_motion(rng, n_frames, positions=False, scale=180.0, fps=30.0, height=None) -> MotionSequence:
    rot = rng.uniform(-scale, scale, (n_frames, 24, 3))
    pos = rng.normal(0.0, 0.3, (n_frames, 24, 3)) if positions else None
    return MotionSequence(rot, pos, fps, height)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def expert_corpus():
    return corpus.corpus()


@pytest.fixture(scope="session")
def dataset(expert_corpus):
    return simulate.build_dataset(expert_corpus, simulate.SimulationConfig(), seed=0)


@pytest.fixture(scope="session")
def model(dataset):
    return forest.train_forest(dataset, 5, None, 0)


@pytest.fixture(scope="session")
def fixture_paths():
    return corpus.bundled_fixture_paths()


@pytest.fixture(scope="session")
def fixture_pair():
    return corpus.load_fixture_pair()


# one line per acceptance criterion, filled by test_acceptance and printed at the end
ACCEPTANCE: dict[int, str] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        if getattr(getattr(item, "obj", None), "is_hypothesis_test", False):
            item.add_marker(pytest.mark.property)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
