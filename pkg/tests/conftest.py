import pytest

from hpmstack.platform import PlatformDescription, builtin_platform
from hpmstack.pmu import PmuState

# (criterion, passed, detail) rows appended by test_acceptance.py
ACCEPTANCE_RESULTS = []


def make_platform(**kw):
    base = dict(xlen=64, base_counter_width=64, event_counter_width=64, num_event_counters=29)
    base.update(kw)
    return PlatformDescription(**base)


@pytest.fixture
def cva6():
    return builtin_platform("cva6")


@pytest.fixture
def spike():
    return builtin_platform("spike")


@pytest.fixture
def sixteen():
    """Counters 0..15: cycle, time, instret and hpmcounter3..15."""
    return make_platform(num_event_counters=13, name="sixteen")


@pytest.fixture
def mini():
    return make_platform(num_event_counters=4, event_counter_width=16, name="mini")


@pytest.fixture
def rv32():
    return make_platform(xlen=32, num_event_counters=4, name="rv32")


@pytest.fixture
def cva6_state(cva6):
    return PmuState(cva6)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in ACCEPTANCE_RESULTS:
        status = "SUBST" if passed is None else "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status}  {criterion}: {detail}")
