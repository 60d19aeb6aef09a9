from fractions import Fraction

import pytest
from hypothesis import settings

from qortho.modelrhp import build_model
from qortho.qcalc import QParams
from qortho.verify import build_for
from qortho.weights import parse_weight

settings.register_profile("default", deadline=None, max_examples=30, derandomize=True)
settings.load_profile("default")

HALF = Fraction(1, 2)


@pytest.fixture(scope="session")
def unit_rec():
    """Exact unit-weight table, q = 1/2, alpha = 0, n <= 20."""
    return build_for(parse_weight("unit", HALF), 20)


@pytest.fixture(scope="session")
def catalog_recs(unit_rec):
    recs = {"unit": unit_rec}
    for w in ("qhermite1", "polyperturbation:c=-2"):
        recs[w] = build_for(parse_weight(w, HALF), 20)
    return recs


@pytest.fixture(scope="session")
def model():
    return build_model(QParams(HALF, 0), 80)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdict lines after the run."""
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for num in sorted(lines):
            terminalreporter.write_line(lines[num])
