import os

import numpy as np
import pytest

from coopvrp.instance import EdgeWeightKind, Instance

DATA = os.path.join(os.path.dirname(__file__), "..", "data")

_verdicts: list[str] = []


def record_verdict(line: str) -> None:
    _verdicts.append(line)


def pytest_terminal_summary(terminalreporter):
    if _verdicts:
        terminalreporter.section("acceptance criteria")
        for line in _verdicts:
            terminalreporter.write_line(line)


def random_instance(n_customers, capacity, seed, demand_range=(1, 10), name=None, kind=EdgeWeightKind.ROUNDED):
    rng = np.random.default_rng(seed)
    coords = rng.integers(0, 1000, (n_customers + 1, 2)).astype(np.float64)
    lo, hi = demand_range
    dem = np.r_[0, rng.integers(lo, hi + 1, n_customers)]
    return Instance(name or f"rand-{n_customers}-{seed}", coords, dem, capacity, kind)


def data_path(name):
    return os.path.join(DATA, name)


@pytest.fixture
def small_inst():
    return random_instance(30, 40, 7)
