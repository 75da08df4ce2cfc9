import json

import numpy as np
import pytest

from specdemand import _kernels
from specdemand.geo import GeoPoint, ProjectedPoint, make_grid, unproject

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def report():
    """Record (and print) one pass/fail line for an acceptance criterion."""
    def _report(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return _report


def square_grid(n_cols, n_rows=None, cell=1500.0, center=(45.0, -75.0)):
    """Grid of exactly ``n_cols x n_rows`` cells centered on ``center``."""
    n_rows = n_rows or n_cols
    c = GeoPoint(*center)
    hx, hy = n_cols * cell / 2, n_rows * cell / 2
    return make_grid(unproject(ProjectedPoint(-hx, -hy), c), unproject(ProjectedPoint(hx, hy), c),
                     cell)


@pytest.fixture
def grid4():
    return square_grid(4)


@pytest.fixture(params=_kernels.available())
def backend(request):
    prev = _kernels.use(request.param)
    yield request.param
    _kernels.use(prev)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_config(path, doc):
    path.write_text(json.dumps(doc, indent=1), encoding="utf-8")
    return path
