import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_stack(rng, channels=3, h=24, w=24):
    """Random relaxed label stack on the simplex."""
    raw = rng.random((channels, h, w)) + 1e-3
    return raw / raw.sum(axis=0, keepdims=True)


def disc_mask(h, w, cy, cx, radius):
    yy, xx = np.mgrid[0:h, 0:w]
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= radius ** 2


def stack_from_mask(mask):
    fg = mask.astype(np.float64)
    return np.stack([1.0 - fg, fg])
