"""
Shared fixtures and the --runslow switch
"""

import os
import sys

import numpy as np
import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.simulation.dictionary import Dictionary, generate_dictionary  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run the desk-scale acceptance experiments")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def small_dictionary():
    """N=16, M=40 random dictionary"""
    return generate_dictionary(16, 40, seed=3)


@pytest.fixture
def identity_dictionary():
    """Orthonormal 8 x 8 dictionary"""
    return Dictionary(np.eye(8))
