import pytest

from isodimer import isoradial as iso
from isodimer.elliptic import complete_integrals

_GRAPH_CACHE = {}


def get_graph(spec):
    if spec not in _GRAPH_CACHE:
        _GRAPH_CACHE[spec] = iso.make_isoradial(iso.builder_graph(spec))
    return _GRAPH_CACHE[spec]


@pytest.fixture(scope="session")
def ig_1x1():
    return get_graph("square:1x1")


@pytest.fixture(scope="session")
def ig_1x2():
    return get_graph("square:1x2")


@pytest.fixture(scope="session")
def ig_2x2():
    return get_graph("square:2x2")


@pytest.fixture(scope="session")
def ig_3x3():
    return get_graph("square:3x3")


@pytest.fixture(scope="session")
def ig_4x3():
    return get_graph("square:4x3")


@pytest.fixture(scope="session")
def ig_hex():
    return get_graph("hex")


@pytest.fixture(scope="session")
def params_half():
    return complete_integrals(0.5)
