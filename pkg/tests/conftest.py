import sys

import numpy as np
import pytest

from compopt.uwd import UWD


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def shared_variable_uwd():
    """Three boxes f(w,x), g(u,w,y), h(u,w,z) on junctions u,w,x,y,z = 0..4, all exposed."""
    return UWD.from_lists([2, 3, 3], 5, [1, 2, 0, 1, 3, 0, 1, 4], [0, 1, 2, 3, 4])


@pytest.fixture
def two_box_uwd():
    """{1,2}+{3,4} -> {a,b,c} <- {1',2'} with 1->a, 2->b, 3->b, 4->c, 1'->a, 2'->c."""
    return UWD.from_lists([2, 2], 3, [0, 1, 1, 2], [0, 2])


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.LINES:
        return
    terminalreporter.section("acceptance")
    for k in sorted(mod.LINES):
        terminalreporter.write_line(mod.LINES[k])
