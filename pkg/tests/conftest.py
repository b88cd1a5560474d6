import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_configure(config):
    config.acceptance_lines = {}


@pytest.fixture
def acceptance_log(request):
    """Record ``(criterion, passed, detail)`` for the terminal summary."""
    lines = request.config.acceptance_lines

    def log(number, title, passed, detail):
        lines[number] = f"criterion {number} {'PASS' if passed else 'FAIL'}: {title}: {detail}"

    return log


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "acceptance_lines", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
