import numpy as np
import pytest

from lossylie.liouville import SystemParams


def random_params(rng, n_modes=2, kappa_range=(0.3, 1.5), gamma_max=1.0, sigma_max=1.0):
    return SystemParams.from_values(
        rng.uniform(-sigma_max, sigma_max, n_modes),
        rng.uniform(0.0, gamma_max, n_modes),
        rng.uniform(*kappa_range, n_modes - 1),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = {}


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
