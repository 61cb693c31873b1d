import pytest
from hypothesis import HealthCheck, settings

from crashsynth import data
from crashsynth.roadmap import load_map

settings.register_profile("crashsynth", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("crashsynth")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def fig3_network():
    return load_map(data.map_path("fig3_intersection"))


@pytest.fixture(scope="session")
def sf_grid():
    return load_map(data.map_path("sf_grid"))


@pytest.fixture
def acceptance_line():
    """Record one pass/fail line per acceptance criterion; printed at the end of the run."""

    def record(number: int, title: str, passed: bool, detail: str) -> None:
        line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
