import re
from pathlib import Path

import pytest

from burstgate.kernel import available_backends

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"


@pytest.fixture
def scenario_dir():
    return SCENARIOS


@pytest.fixture(params=sorted(available_backends()))
def droptail(request):
    return available_backends()[request.param]


ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Marks a test as an acceptance criterion; the outcome is recorded from its report."""


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion label")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker and (rep.when == "call" or rep.failed):
        name = marker.args[0]
        if rep.when == "call" or ACCEPTANCE.get(name) != "FAIL":
            ACCEPTANCE[name] = "PASS" if rep.passed else "FAIL"


def _order(name):
    num, sub = re.match(r"(\d+)(\w*)", name).groups()
    return int(num), sub


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=_order):
        terminalreporter.write_line(f"{ACCEPTANCE[name]}  {name}")
