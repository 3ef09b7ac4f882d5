import numpy as np
import pytest

from noisy20q.channel import LipschitzFn, MdBSC


@pytest.fixture
def inc_channel():
    return MdBSC(0.5, LipschitzFn(0.1, 0.3))


@pytest.fixture
def dec_channel():
    return MdBSC(0.5, LipschitzFn(0.4, -0.3))


@pytest.fixture
def noiseless():
    return MdBSC(0.5, LipschitzFn.constant(0.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
