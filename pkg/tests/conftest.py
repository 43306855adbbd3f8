import numpy as np
import pytest

from lanelab.common import Limits
from lanelab.datakit import Dataset
from lanelab.simworld import CameraConfig
from lanelab.simworld.tracks import get_circuit


@pytest.fixture(scope="session")
def camera64():
    return CameraConfig(resolution=(64, 48))


@pytest.fixture(scope="session")
def oval():
    return get_circuit("oval")


def make_synth_dataset(n_episodes=3, per_episode=40, h=48, w=64, seed=0):
    """Random-image dataset with labels inside the limits; fast stand-in for a
    recorded one in training/datakit mechanics tests."""
    rng = np.random.default_rng(seed)
    limits = Limits()
    ds = Dataset(h, w, [f"synth_{i}" for i in range(n_episodes)], limits)
    for ep in range(n_episodes):
        samples = []
        for i in range(per_episode):
            img = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
            samples.append(
                _SynthSample(img, float(rng.uniform(0, limits.v_max)),
                             float(rng.uniform(-limits.w_max, limits.w_max)), i * 0.05)
            )
        ds.add_episode(ep, samples)
    return ds


class _SynthFrame:
    def __init__(self, pixels):
        self.pixels = pixels


class _SynthSample:
    def __init__(self, pixels, v, w, t):
        self.frame = _SynthFrame(pixels)
        self.v = v
        self.w = w
        self.t = t


@pytest.fixture(scope="session")
def synth_dataset():
    return make_synth_dataset()
