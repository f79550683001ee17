import logging

import pytest


@pytest.fixture(autouse=True)
def _quiet_warnings(caplog):
    # pipeline warnings are expected in degradation tests; keep output readable
    caplog.set_level(logging.ERROR, logger="subhop")
    yield
