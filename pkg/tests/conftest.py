import numpy as np
import pytest

import tvbseg
from tvbseg.numerics import F32


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the jit kernels once so timed tests measure steady state."""
    model = tvbseg.init_model(seed=0)
    image = np.zeros((32, 32), dtype=F32)
    box = tvbseg.BoxPrompt(4, 4, 28, 28)
    tvbseg.deterministic_mask(model, image, box)
    stats = tvbseg.TokenStats(np.full(model.d, 0.01, dtype=F32),
                              np.zeros(model.d, dtype=F32), 1)
    tvbseg.infer(model, image, box, stats, k=2, rng=tvbseg.RngStream(0, 0))


@pytest.fixture()
def small_model():
    return tvbseg.init_model(seed=0, d=32, m=8, c=16, patch=4, hidden=12)


@pytest.fixture()
def small_kan_model():
    return tvbseg.init_model(seed=0, d=32, m=8, c=16, patch=4, hidden=12,
                             variant="kan")


@pytest.fixture()
def small_image():
    rng = np.random.default_rng(77)
    return rng.random((24, 24), dtype=np.float32)


@pytest.fixture()
def small_box():
    return tvbseg.BoxPrompt(4, 6, 20, 18)
