import sys

import pytest

from dnls_gibbs.torus_field import sample_coefficients


@pytest.fixture
def fields():
    """A reproducible batch of 64 fields at n_max = 12, scaled down a little."""
    return sample_coefficients(2024, 0, 64, 12) * 0.6


def pytest_terminal_summary(terminalreporter):
    acc = sys.modules.get("test_acceptance")
    if acc is not None and acc.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acc.LINES:
            terminalreporter.write_line(line)
