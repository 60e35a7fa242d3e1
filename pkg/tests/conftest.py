import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from frdl.ingest import generate_synthetic_dataset
from frdl.net import FC, LSTM, Conv, MaxPool, NetworkConfig, ReLU, SoftmaxHead

settings.register_profile(
    "default", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# filled by tests/test_acceptance.py, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_dataset():
    """3 classes x 6 clips, 12 frames of 32x32."""
    return generate_synthetic_dataset(3, 6, 12, 32, 0.0, seed=3)


@pytest.fixture
def tiny_config():
    """2 conv layers, hidden 4, 3 classes, bidirectional, all three fusion blocks."""
    return NetworkConfig(
        layers=[Conv((3, 3), 1, 2), ReLU(), Conv((3, 3), 1, 2), ReLU(), MaxPool(2, 2), FC(3), ReLU(),
                LSTM(4, 2, True), SoftmaxHead(3)],
        frame_input=(8, 8, 1),
        skeleton_layers=[Conv((3, 3), 1, 2, padding=1), ReLU(), FC(3)],
        skeleton_input=(3, 4, 3),
        hog_dim=5,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
