import time

import numpy as np
import pytest

_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


class Criterion:
    """Times one acceptance criterion and prints its PASS/FAIL line."""

    def __init__(self, lines, name, budget):
        self.lines, self.name, self.budget = lines, name, budget
        self.t0 = time.perf_counter()

    def finish(self, ok, detail):
        elapsed = time.perf_counter() - self.t0
        in_time = elapsed < self.budget
        line = f"{'PASS' if ok and in_time else 'FAIL'} {self.name}: {detail}; {elapsed:.2f} s (budget {self.budget:g} s)"
        self.lines.append(line)
        print(line)
        assert ok, line
        assert in_time, line


@pytest.fixture
def criterion(request):
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])
    return lambda name, budget: Criterion(lines, name, budget)


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
