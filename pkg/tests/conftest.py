import itertools
import math

import pytest

from qsfl.model import make_source_u

SCHEME_NAMES = ("SCORPA", "COPACR", "SCORACP", "CRCP")

# every (K, b, B_max, power dB) combination over K, b in {1, 2}, B_max in {4, inf}, P in {10, 30}
SMOKE_GRID = tuple(itertools.product((1, 2), (1.0, 2.0), (4.0, math.inf), (10.0, 30.0)))

# acceptance verdicts, printed once at the end of the run
VERDICTS = {}


def record(criterion: int, ok: bool, detail: str):
    VERDICTS[criterion] = (ok, detail)


@pytest.fixture(scope="session")
def source_u():
    return make_source_u()


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(VERDICTS):
        ok, detail = VERDICTS[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
