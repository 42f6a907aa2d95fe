import re
import time

import numpy as np
import pytest

from gmsfem.coeff import generate_field
from gmsfem.grid import build_grids

# acceptance outcomes, filled by tests/test_acceptance.py
ACCEPTANCE = {}
_START = time.perf_counter()


def record(key, passed, detail):
    ACCEPTANCE[key] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    elapsed = time.perf_counter() - _START
    tr = terminalreporter
    tr.section("acceptance criteria")
    def order(key):
        m = re.match(r"AC(\d+)", key)
        return (0, int(m.group(1))) if m else (1, key)

    for key in sorted(ACCEPTANCE, key=order):
        passed, detail = ACCEPTANCE[key]
        tr.write_line(f"{'PASS' if passed else 'FAIL'} {key}: {detail}")
    tr.write_line(f"{'PASS' if elapsed < 600 else 'FAIL'} suite runtime: {elapsed:.1f} s (budget 600 s)")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_grid():
    return build_grids(12, 3)


@pytest.fixture(scope="session")
def small_channels():
    return generate_field("channels", 12, {"n_strips": 2, "width": 1, "orientation": "mixed",
                                           "contrast": 1e3}, seed=4)
