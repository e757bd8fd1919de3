from pathlib import Path

import pytest

from bayesimpl.cli import bundled_scenario
from bayesimpl.model import read_scenario
from bayesimpl.report import deception_names

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def firm():
    return read_scenario(bundled_scenario("firm"))


@pytest.fixture(scope="session")
def env(firm):
    return firm.env


@pytest.fixture(scope="session")
def F(firm):
    return firm.scf


@pytest.fixture(scope="session")
def named(firm):
    return deception_names(firm)


@pytest.fixture
def load_data():
    def load(name, strict=True):
        return read_scenario((DATA / name).read_text(), strict=strict)
    return load
