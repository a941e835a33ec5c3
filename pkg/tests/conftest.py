"""Shared fixtures: normal-form packages are built once per session."""
from __future__ import annotations

import numpy as np
import pytest

from cislunar_nf.dynamics import SystemParams
from cislunar_nf.nfbuild import reduce

# order used for the closed-loop and family experiments
SK_ORDER = 11

_PACKAGES: dict = {}


def get_package(point: str, kind: str, order: int):
    key = (point, kind, order)
    if key not in _PACKAGES:
        _PACKAGES[key] = reduce(SystemParams.from_mu(None, point), kind, order)
    return _PACKAGES[key]


@pytest.fixture(scope="session")
def l1():
    return SystemParams.from_mu(None, "L1")


@pytest.fixture(scope="session")
def l2():
    return SystemParams.from_mu(None, "L2")


@pytest.fixture(scope="session")
def package():
    """Factory ``package(point, kind, order)`` with session caching."""
    return get_package


@pytest.fixture(scope="session")
def l1_res(package):
    return package("L1", "resonant", SK_ORDER)


@pytest.fixture(scope="session")
def l1_bk(package):
    return package("L1", "birkhoff", SK_ORDER)


@pytest.fixture(scope="session")
def l2_res(package):
    return package("L2", "resonant", SK_ORDER)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
