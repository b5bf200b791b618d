import pytest

from support import seesaw_configs, seesaw_protocol


@pytest.fixture
def seesaw():
    return seesaw_protocol()


@pytest.fixture
def seesaw_runs():
    return seesaw_configs()
