import functools
import json
from pathlib import Path

import pytest

from wedge import build_policy, dimensionless, solve_boundaries

FROZEN = json.loads((Path(__file__).parent / "data" / "frozen.json").read_text())

BASE = (0.5, 1.0, 2.0 / 3.0)  # interior case, q_M = 0.75
SINGULAR = (1.5, 1.0, 2.0 / 3.0)  # curves cross q = 1
CONDITIONAL = (13.5, 6.0, 2.0 / 3.0)
ALWAYS_ILL = (17.5, 6.0, 2.0 / 3.0)
NEG_DRIFT = (-1.0, 1.0, 2.0 / 3.0)
HIGH_R = (1.0, 1.0, 2.0)


@pytest.fixture(scope="session")
def frozen():
    return FROZEN


@functools.lru_cache(maxsize=None)
def solved(eps, delta, R, lam, gamma=0.0, beta=1.0):
    """(params, WedgeSolution, PolicySpec), cached across tests."""
    d = dimensionless(eps, delta, R, lam=lam, gamma=gamma, beta=beta)
    w = solve_boundaries(d)
    return d, w, build_policy(w, d)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
