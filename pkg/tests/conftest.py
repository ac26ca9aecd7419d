import numpy as np
import pytest

from rwtq.env import EpisodicMdp


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def two_state_det(gamma=0.9):
    """Deterministic 2-state / 2-action / H=2 task used by several oracles."""
    R = np.array([[[1.0, 0.0], [0.5, 2.0]], [[0.0, 1.0], [3.0, 0.2]]])
    nxt = np.array([[[0, 1], [1, 0]], [[1, 0], [0, 1]]])
    return EpisodicMdp(2, 2, 2, gamma, R, next_states=nxt)


@pytest.fixture
def det_mdp():
    return two_state_det()
