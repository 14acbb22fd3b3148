import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from yamcap.exponents import Exponents
from yamcap.geometry import Ball, CompactSetSpec
from yamcap.grids import GridSpec

SCENES = os.path.join(os.path.dirname(__file__), "..", "src", "yamcap", "scenes")


def scene_path(name):
    return os.path.join(SCENES, name + ".json")


@pytest.fixture(scope="session")
def expo3():
    return Exponents.for_dimension(3)


@pytest.fixture(scope="session")
def radial_grid3():
    return GridSpec.radial(2.05, 205, ambient_dim=3)


@pytest.fixture(scope="session")
def ball_quarter():
    return CompactSetSpec(3, (Ball(center=(0.0, 0.0, 0.0), radius=0.25),))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
