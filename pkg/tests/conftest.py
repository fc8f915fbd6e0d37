import numpy as np
import pytest

from rgglab.rng import RngStream

# Calibrated by scripts/calibrate_slab.py (max ratio 3.1726 over its grid, rounded up).
SLAB_CONSTANT = 3.18

D_GRID = [2, 3, 10, 100, 1000]
P_GRID = [1e-6, 1e-3, 0.01, 0.1, 0.5]


@pytest.fixture
def stream(request):
    # one stream per test, keyed on the test name so reruns are identical
    key = sum(ord(c) * 31**i for i, c in enumerate(request.node.name)) % 2**63
    return RngStream(20240601, key)


@pytest.fixture
def gen(stream):
    return stream.generator()


def within_sigmas(estimate, target, stderr, k=4.0):
    return abs(estimate - target) <= k * stderr


def binomial_se(p, n):
    return np.sqrt(p * (1 - p) / n)


ACCEPTANCE_LINES = []


def report_criterion(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
