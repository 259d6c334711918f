import pytest

from causalman.line import build, preset


@pytest.fixture(scope="session")
def small_graph():
    return build(preset("small"))


@pytest.fixture(scope="session")
def medium_graph():
    return build(preset("medium"))
