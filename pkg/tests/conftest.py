import pytest
from hypothesis import HealthCheck, settings

from shortaoi.analytics import LinkTiming
from shortaoi.channel import ChannelConfig

settings.register_profile("default", max_examples=150, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def reference_channel():
    # N = 150 bits at 4.5 dB
    return ChannelConfig.from_db(150, 4.5)


@pytest.fixture
def timing_033():
    return LinkTiming(0.006, 0.33)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
