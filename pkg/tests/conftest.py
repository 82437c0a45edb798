import warnings

import numpy as np
import pytest

from henon_renorm.henon import example_map
from henon_renorm.regions import compute_K
from henon_renorm.renorm import build_tower, feigenbaum_lift, level_manifolds
from henon_renorm.unimodal import solve_feigenbaum

# Feigenbaum's constant from the literature, used as an independent reference
LAMBDA_REF = 2.502907875095892822


@pytest.fixture(scope="session")
def sol():
    return solve_feigenbaum(40, 1e-10)


@pytest.fixture(scope="session")
def g_lift():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return feigenbaum_lift()


@pytest.fixture(scope="session")
def g_tower(g_lift):
    return build_tower(g_lift[0], 5)


@pytest.fixture(scope="session")
def example():
    return example_map()


@pytest.fixture(scope="session")
def degenerate_example():
    return example_map(0.0)


@pytest.fixture(scope="session")
def tower(example):
    return build_tower(example, 12)


@pytest.fixture(scope="session")
def degenerate_tower(degenerate_example):
    return build_tower(degenerate_example, 3)


@pytest.fixture(scope="session")
def level_sets(tower):
    """Level manifolds of the Example tower, computed once per level."""
    cache = {}

    def get(n):
        if n not in cache:
            cache[n] = level_manifolds(tower, n)
        return cache[n]

    return get


@pytest.fixture(scope="session")
def K_of(tower, level_sets):
    cache = {}

    def get(n, b=10.0):
        if (n, b) not in cache:
            cache[(n, b)] = compute_K(tower, n, b, levels=level_sets(n))
        return cache[(n, b)]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
