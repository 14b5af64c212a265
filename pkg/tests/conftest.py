import os

import hypothesis
import pytest

from subgraph_cavity.network import bmatching_network

hypothesis.settings.register_profile("ci", max_examples=40, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=400, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


@pytest.fixture
def single_edge():
    return bmatching_network(2, [[0, 1]], 1)


@pytest.fixture
def path3():
    return bmatching_network(3, [[0, 1], [1, 2]], 1)


@pytest.fixture
def triangle():
    return bmatching_network(3, [[0, 1], [1, 2], [0, 2]], 1)


@pytest.fixture
def star3():
    return bmatching_network(4, [[0, 1], [0, 2], [0, 3]], 1)
