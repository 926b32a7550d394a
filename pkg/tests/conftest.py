import numpy as np
import pytest

from bcnfchaos.bcnf import BcnfParams
from bcnfchaos.converter import ConverterParams

ACCEPTANCE_LINES = []

# normal form of the converter at its border collision, rounded to 4 places
CONVERTER_BCNF = BcnfParams(1.1694, 0.2985, 1.1970, 4.6325)
SAMPLE = BcnfParams(1.4, 1.0, 1.15, 1.15)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def converter_bcnf():
    return CONVERTER_BCNF


@pytest.fixture(scope="session")
def sample():
    return SAMPLE


@pytest.fixture(scope="session")
def standard_converter():
    return ConverterParams.standard(5.45)


@pytest.fixture(scope="session")
def trapping_region():
    from bcnfchaos.region import invariant_closure, patch_seed

    return invariant_closure(CONVERTER_BCNF, patch_seed(CONVERTER_BCNF), inflate=1e-4)


@pytest.fixture(scope="session")
def fi_region():
    from bcnfchaos.region import invariant_closure, patch_seed

    return invariant_closure(CONVERTER_BCNF, patch_seed(CONVERTER_BCNF), inflate=0.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
