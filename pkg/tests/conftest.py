import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rssloc import BuildingLayout, PropagationParams, Scenario, Source


@pytest.fixture
def params():
    return PropagationParams()


@pytest.fixture
def flat_layout():
    return BuildingLayout(np.zeros((60, 60), dtype=np.uint8))


def make_flat_scenario(sources, size=60, sid="t", seed=0):
    layout = BuildingLayout(np.zeros((size, size), dtype=np.uint8))
    return Scenario(layout=layout, sources=[Source(*s) for s in sources],
                    id=sid, rng_seed=seed)
