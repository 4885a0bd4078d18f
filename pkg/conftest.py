"""
Shared fixtures. The repository root is put on sys.path by pytest since this
file lives there, so the solver modules import as top-level modules.
"""
import os

import pytest

from dielectric import PerfectConductor, gold_drude
from kernel import provider_for
from lifshitz import FrequencyGrid, PlatePair, build_grid
from monitoring import get_monitor

ROOT = os.path.dirname(os.path.abspath(__file__))


@pytest.fixture
def optical_table_path():
    return os.path.join(ROOT, 'data', 'gold_drude_test_table.dat')


@pytest.fixture
def perfect_pair():
    return PlatePair(PerfectConductor(), PerfectConductor(), FrequencyGrid.zero())


@pytest.fixture
def perfect_provider():
    return provider_for(PerfectConductor())


@pytest.fixture
def gold():
    return gold_drude()


@pytest.fixture
def gold_pair_300k(gold):
    return PlatePair(gold, gold, build_grid(300.0, 100.0))


@pytest.fixture(autouse=True)
def fresh_monitor():
    get_monitor().reset()
    yield
    get_monitor().reset()
