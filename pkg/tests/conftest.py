import numpy as np
import pytest

from redfluct.exact import PureState, product_state
from redfluct.model import ChainSpec

UP = np.array([1.0, 0.0])
DOWN = np.array([0.0, 1.0])
PLUS_X = np.array([1.0, 1.0]) / np.sqrt(2)
S2 = 1 / np.sqrt(2)


def two_site(amps):
    # amplitudes in index order |up up>, |down up>, |up down>, |down down>
    # (index bit j is site j, 1 = down)
    return PureState(np.asarray(amps, dtype=float), ChainSpec(2))


@pytest.fixture
def singlet():
    # (|ud> - |du>)/sqrt2 ; |ud> has site 1 down -> index 2
    return two_site([0, -S2, S2, 0])


@pytest.fixture
def cat():
    return two_site([S2, 0, 0, S2])


@pytest.fixture
def upup():
    return product_state([UP, UP])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict = {}


def record_criterion(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[n] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
