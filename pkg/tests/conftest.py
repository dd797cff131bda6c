from __future__ import annotations

import numpy as np
import pytest

from rpnevo.backend import CaseTable
from rpnevo.rng import RandomStream


@pytest.fixture
def rng() -> RandomStream:
    return RandomStream(1234)


@pytest.fixture
def small_table() -> CaseTable:
    gen = np.random.default_rng(7)
    inputs = gen.uniform(1.0, 5.0, size=(16, 2))
    targets = inputs[:, 0] + inputs[:, 1]
    return CaseTable(inputs=inputs, targets=targets)


def make_stream(seed: int) -> RandomStream:
    return RandomStream(seed)
