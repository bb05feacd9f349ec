import pytest

from sega.sketch import make_rng


@pytest.fixture
def rng():
    return make_rng(1234)

