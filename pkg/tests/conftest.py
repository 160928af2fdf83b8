import math
from pathlib import Path

import pytest

from rydspin import DriveParams, sample_channels

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"


@pytest.fixture(scope="session")
def ch():
    return sample_channels()


@pytest.fixture
def ice_drive():
    # delta_m = -delta_p, omega_m = omega_p / 4
    return DriveParams(10.0, 2.5, -50.0, 50.0)


@pytest.fixture
def fig4_drive():
    return DriveParams(10.0, 5.0, 40.0, -60.0)


@pytest.fixture
def configs():
    return CONFIGS


HALF_PI = math.pi / 2


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one result line per criterion; printed at the end of the run and asserted by the caller."""

    def record(k, ok, detail=""):
        ACCEPTANCE_LINES.append(f"ACCEPTANCE {k}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())
        print(ACCEPTANCE_LINES[-1])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: (int(s.split()[1].rstrip(":").rstrip("abc")), s)):
            terminalreporter.write_line(line)
