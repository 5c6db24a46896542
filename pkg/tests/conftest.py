import math
import warnings

import pytest

from mirrorcool import make_params
from mirrorcool.core import AdiabaticityWarning

ACCEPTANCE_LINES: list[str] = []

LAMBDA = 2 * math.pi
X_BEST = -3 * LAMBDA / 16  # node-relative offset of maximum friction


@pytest.fixture
def baseline():
    return make_params()


@pytest.fixture
def params_at():
    def build(**kw):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AdiabaticityWarning)
            return make_params(kw)
    return build


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
