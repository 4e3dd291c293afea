import pathlib

import pytest

from junctio.model import scenario_from_dict

from corpus import ORACLE, THREEFOLD_CYCLE, TWOFOLD_ASYM, TWOFOLD_SYM

SCENARIO_DIR = pathlib.Path(__file__).resolve().parent.parent / "scenarios"


def _coarse(doc, h=0.01):
    doc = dict(doc)
    doc["grid_step"] = h
    return doc


@pytest.fixture(scope="session")
def twofold_asym():
    return scenario_from_dict(_coarse(TWOFOLD_ASYM))


@pytest.fixture(scope="session")
def twofold_sym():
    return scenario_from_dict(_coarse(TWOFOLD_SYM))


@pytest.fixture(scope="session")
def threefold_cycle():
    return scenario_from_dict(_coarse(THREEFOLD_CYCLE))


@pytest.fixture(scope="session")
def oracle_scenario():
    return scenario_from_dict(_coarse(ORACLE))
