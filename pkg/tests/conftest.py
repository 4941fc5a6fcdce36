import math

import pytest

from holosim.calibration.protocol import run_calibration, spectral_calibration
from holosim.config import ScenarioConfig
from holosim.device import DeviceParams
from holosim.experiments import run_table1

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def device():
    return DeviceParams()


@pytest.fixture(scope="session")
def spectral_table(device):
    return spectral_calibration(device)


@pytest.fixture(scope="session")
def protocol_report(device):
    """Full simulated calibration (spectroscopy, Rabi, two-tone maps); about a minute."""
    return run_calibration(device)


@pytest.fixture(scope="session")
def charge_noise_run(spectral_table):
    """Finite-T1 swap averaged over the default 11 x 11 charge-noise grid; a few minutes."""
    rep = run_table1(ScenarioConfig(), spectral_table, rows=["finite_t1_charge_noise"])
    return rep.data["finite_t1_charge_noise"]


@pytest.fixture
def record():
    """Print and keep one PASS/FAIL line per acceptance check."""
    def emit(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return ok
    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
