"""Shared fixtures; modules under src/ are imported by bare name."""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / 'src'))


@pytest.fixture
def rng():
    import numpy as np
    return np.random.default_rng(12345)
