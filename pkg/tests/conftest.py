"""
Shared fixtures: the 4x4 torus, its state space and a few chains.

Expensive objects are session-scoped; tests must not mutate them.
"""

import os

import pytest

from hcgl_analyzer.chain import build_chain
from hcgl_analyzer.landscape import build_set_S
from hcgl_core.configuration import enumerate_states, stationary_law
from hcgl_core.contours import ClassificationCache
from hcgl_core.topology import build_general, build_torus


def pytest_collection_modifyitems(config, items):
    gates = {
        "slow": ("HCGL_RUN_SLOW", "slow: set HCGL_RUN_SLOW=1 to run"),
        "heavy": ("HCGL_RUN_HEAVY", "hours of CPU: set HCGL_RUN_HEAVY=1 to run"),
    }
    for marker, (variable, reason) in gates.items():
        if os.environ.get(variable) == "1":
            continue
        skip = pytest.mark.skip(reason=reason)
        for item in items:
            if marker in item.keywords:
                item.add_marker(skip)


@pytest.fixture(scope="session")
def torus4():
    return build_torus(4)


@pytest.fixture(scope="session")
def space4(torus4):
    return enumerate_states(torus4)


@pytest.fixture(scope="session")
def cache4(space4):
    cache = ClassificationCache(space4)
    cache.classify_all()
    return cache


@pytest.fixture(scope="session")
def set_s4(space4, cache4):
    return build_set_S(space4, cache4)


@pytest.fixture(scope="session")
def law4_sigma10(space4):
    return stationary_law(space4, sigma=10.0)


@pytest.fixture(scope="session")
def chain4_sigma10(space4):
    return build_chain(space4, sigma=10.0)


@pytest.fixture(scope="session")
def chain4_sigma2(space4):
    return build_chain(space4, sigma=2.0)


@pytest.fixture
def path3():
    """Path graph 0 - 1 - 2."""
    return build_general([[1], [0, 2], [1]])
