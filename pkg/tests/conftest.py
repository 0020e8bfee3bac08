import numpy as np
import pytest


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance: end-to-end acceptance criteria (slow)")


@pytest.fixture
def rng():
    return np.random.default_rng(0xC0FFEE)


def random_frame(rng, h=32, w=40):
    return rng.integers(0, 256, (h, w), dtype=np.uint8)
