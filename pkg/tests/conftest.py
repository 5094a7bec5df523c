import numpy as np
import pytest

from picosync.estimation import build_bias_lut
from picosync.twtt import Transceiver
from picosync.waveform import generate_two_tone

FS = 200e6
TS = 1 / FS


@pytest.fixture(scope="session")
def waveform():
    return generate_two_tone(40e6, 10e-6, 5e-9, FS)


@pytest.fixture(scope="session")
def lut(waveform):
    return build_bias_lut(waveform)


@pytest.fixture(scope="session")
def transceiver(waveform, lut):
    return Transceiver(waveform, lut)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one acceptance verdict line; printed in the terminal summary."""

    def _report(criterion: str, passed: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"criterion {criterion}: {'PASS' if passed else 'FAIL'} | {detail}")
        print(ACCEPTANCE_LINES[-1])

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
