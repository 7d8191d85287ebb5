import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from quasitree.complex import build_complex  # noqa: E402
from quasitree.core import CoreParams  # noqa: E402
from quasitree.hyperbolic import chain_instance, schottky_instance  # noqa: E402

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


class Built:
    """An instance with its derived constants and complex."""

    def __init__(self, system, **overrides):
        self.system = system
        self.params = CoreParams.derive(system.xi, **overrides)
        self.complex = build_complex(system, self.params)
        self._blowup = None

    @property
    def blowup(self):
        if self._blowup is None:
            from quasitree.blowup import build_blowup
            self._blowup = build_blowup(self.system, self.params, self.complex)
        return self._blowup


@pytest.fixture(scope="session")
def chain():
    return Built(chain_instance())


@pytest.fixture(scope="session")
def schottky2():
    return Built(schottky_instance(word_radius=2))


@pytest.fixture(scope="session")
def schottky3():
    return Built(schottky_instance(word_radius=3))


ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_line():
    """Print and keep a one-line verdict for an acceptance criterion."""
    def record(number, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
