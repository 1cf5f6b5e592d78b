import logging

import numpy as np
import pytest

# mismatch warnings are expected noise in randomized crowd scenes
logging.getLogger("gghl.assign").setLevel(logging.ERROR)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
