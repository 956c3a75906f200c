import sys

import pytest


def pytest_configure(config):
    config.addinivalue_line("markers", "benchmark: wall-clock timing test")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[number])


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(12345)
