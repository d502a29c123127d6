import json
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

DATA = Path(__file__).parent / "data"

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


def load_json(name):
    return json.loads((DATA / name).read_text())


def cplx(pair):
    return complex(float(pair[0]), float(pair[1]))


@pytest.fixture(scope="session")
def special_values():
    return load_json("special_values.json")


@pytest.fixture(scope="session")
def circle_secular():
    return load_json("circle_secular.json")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
