import numpy as np
import pytest

from robustfts.core import FunctionalTimeSeries, Grid


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def make_series(values, start=0.0, stop=1.0):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    return FunctionalTimeSeries(Grid.uniform(values.shape[1], start, stop), values)
