from __future__ import annotations

import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from helpers import ACCEPTANCE_LINES, fact  # noqa: E402
from symtime.core import FactSet  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture
def pelikan() -> FactSet:
    # month-granular predicates, as in the worked adjacency example
    return FactSet(
        [
            fact("works_for", "Jaroslav Pelikan", "Valparaiso University", "1946-01", "1949-01"),
            fact("works_for", "Jaroslav Pelikan", "Concordia Seminary", "1949-01", "1953-01"),
        ]
    )


@pytest.fixture
def pelikan_years() -> FactSet:
    return FactSet(
        [
            fact("works_for", "Jaroslav Pelikan", "Valparaiso University", "1946", "1949"),
            fact("works_for", "Jaroslav Pelikan", "Concordia Seminary", "1949", "1953"),
        ]
    )
