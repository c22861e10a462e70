import pytest

from ldpdetect import NoiseModel, Spectrum


@pytest.fixture
def noise10():
    """sigma2 = 1, theta2 = 10 (10 dB)."""
    return NoiseModel(1.0, 10.0)


@pytest.fixture
def gm05():
    return Spectrum.gauss_markov(0.5)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
