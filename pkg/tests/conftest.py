from __future__ import annotations

import numpy as np
import pytest

from sparse_rank._backend import available_backends


@pytest.fixture(params=sorted(available_backends()))
def kernels(request):
    """Each available kernel backend (compiled and pure)."""
    return available_backends()[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
