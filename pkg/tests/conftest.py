from __future__ import annotations

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def make_image(rng, shape=(48, 64), base=100.0, noise=5.0, hot=0):
    img = rng.normal(base, noise, shape).astype(np.float32)
    for _ in range(hot):
        y = int(rng.integers(0, shape[0]))
        x = int(rng.integers(0, shape[1]))
        img[y, x] = base + 50 * noise
    return img
