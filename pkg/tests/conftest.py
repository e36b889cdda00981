import numpy as np
import pytest

from dislag.problem import Box, NodeSpec, Problem, Quadratic2

ACCEPTANCE_KEY = pytest.StashKey[list]()


def random_problem(rng, n=None, slack=0.1):
    """Random Slater-feasible quadratic problem with n in [2, 20]."""
    n = int(rng.integers(2, 21)) if n is None else n
    nodes = []
    for i in range(n):
        lo = float(rng.uniform(-5, 5))
        hi = lo + float(rng.uniform(1, 30))
        nodes.append([i, Quadratic2(float(rng.uniform(0.01, 2.0)), float(rng.uniform(-5, 5))), Box(lo, hi)])
    lo = sum(nd[2].lo for nd in nodes)
    hi = sum(nd[2].hi for nd in nodes)
    total = lo + (hi - lo) * float(rng.uniform(slack, 1 - slack))
    w = rng.dirichlet(np.ones(n))
    return Problem([NodeSpec(i, c, box, float(total * wi)) for (i, c, box), wi in zip(nodes, w)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line for an acceptance criterion."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    lines = terminalreporter.config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
