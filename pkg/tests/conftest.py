import math

import pytest

from airybeam.phase import AiryParams
from airybeam.scenario import wavelength_from_frequency

LAM = wavelength_from_frequency(140e9)

_ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    _ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {status}  {detail}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(_ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def lam():
    return LAM


@pytest.fixture(scope="session")
def fig3_params():
    return AiryParams(5.0, 0.5, -0.03)


@pytest.fixture(scope="session")
def fig3_waist():
    # 256 elements at half-wavelength pitch; waist = half the aperture
    return 255 * (LAM / 2) / 2


def isclose_rel(a, b, rtol):
    return abs(a - b) <= rtol * max(abs(a), abs(b))


def finite(v):
    return math.isfinite(v)
