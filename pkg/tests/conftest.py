import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from wlacons.config import load_preset  # noqa: E402


def pytest_collection_modifyitems(config, items):
    if os.environ.get("WLACONS_STRESS") == "1":
        return
    skip = pytest.mark.skip(reason="stress run; set WLACONS_STRESS=1")
    for item in items:
        if "stress" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def fig2_pfn():
    return load_preset("fig2-pfn").sim


@pytest.fixture(scope="session")
def fig2_ifn():
    return load_preset("fig2-ifn").sim


@pytest.fixture(scope="session")
def stochastic_cfg():
    return load_preset("fig4-stochastic").sim


@pytest.fixture(scope="session")
def clock_wla():
    return load_preset("clock-fig7-wla").clock


@pytest.fixture(scope="session")
def clock_nowla():
    return load_preset("clock-fig6-nowla").clock
