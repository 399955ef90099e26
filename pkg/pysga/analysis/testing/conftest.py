"""Shared pytest configuration: slow marker and a clean tape per test."""

import numpy as np
import pytest

from pysga.analysis import autodiff as ad


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
                     help='Run slow trend checks (training runs).')


def pytest_configure(config):
    config.addinivalue_line('markers',
                            'slow: long training runs (enable with --runslow)')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    objSkp = pytest.mark.skip(reason='needs --runslow')
    for objItm in items:
        if 'slow' in objItm.keywords:
            objItm.add_marker(objSkp)


@pytest.fixture(autouse=True)
def clean_tape():
    """Every test starts with an empty tape at 32 bit precision."""
    ad.get_tape().reset()
    ad.get_tape().lgcRec = True
    ad.set_precision(np.float32)
    yield
    ad.get_tape().reset()
    ad.get_tape().lgcRec = True
    ad.set_precision(np.float32)
