import numpy as np
import pytest

from bimatch import FeatureMap, ProbMask


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_features(rng, channels, h, w) -> FeatureMap:
    return FeatureMap(rng.standard_normal((channels, h, w)).astype(np.float32))


def random_soft_mask(rng, h, w) -> ProbMask:
    fg = rng.random((h, w))
    return ProbMask.from_fg(fg)


def random_hard_mask(rng, h, w) -> ProbMask:
    return ProbMask.from_binary(rng.random((h, w)) > 0.5)
