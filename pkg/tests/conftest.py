import sys

import pytest

from helpers import DEMO_PROFILE, TraceRecorder
from omapisim.profile import load_profile
from omapisim.stack import build_stack


@pytest.fixture
def demo_profile():
    return load_profile(DEMO_PROFILE)


@pytest.fixture
def stack(demo_profile):
    s = build_stack(demo_profile)
    yield s
    s.close()


@pytest.fixture
def legacy_stack(demo_profile):
    s = build_stack(demo_profile, legacy_mode=True)
    yield s
    s.close()


@pytest.fixture
def trace(stack):
    recorder = TraceRecorder()
    stack.modem.add_trace_hook(recorder)
    return recorder


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
