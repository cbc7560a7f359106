import warnings

import pytest

from dipolecavity.propagators import WaveContext


@pytest.fixture
def ctx():
    return WaveContext()


@pytest.fixture(autouse=True)
def _quiet_validity_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield
