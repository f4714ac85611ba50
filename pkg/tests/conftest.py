import itertools
import math

import pytest

from bayes_regret.measures import Bernoulli, build_class, marginal

ACCEPTANCE_LINES: list[str] = []

GRID_SPEC = {"family": "bernoulli-grid", "start": 0.1, "stop": 0.9, "step": 0.1}
MIXED_SPEC = {"family": "union", "classes": [GRID_SPEC, {"family": "markov-grid", "order": 1, "grid": [0.2, 0.8]}]}
DIRAC3_SPEC = {"family": "dirac-upto", "K": 3}


@pytest.fixture(scope="session")
def fair_coin():
    return Bernoulli(0.5)


@pytest.fixture(scope="session")
def grid_class():
    return build_class(GRID_SPEC)


@pytest.fixture(scope="session")
def mixed_class():
    return build_class(MIXED_SPEC)


@pytest.fixture(scope="session")
def dirac3_class():
    return build_class(DIRAC3_SPEC)


def brute_kl(mu, rho, n):
    """L_n by walking X^n with itertools and scalar marginals; independent of the table path."""
    total = 0.0
    for x in itertools.product(range(mu.alphabet_size), repeat=n):
        lm = marginal(mu, x)
        if lm == -math.inf:
            continue
        lr = marginal(rho, x)
        if lr == -math.inf:
            return math.inf
        total += 2.0**lm * (lm - lr)
    return total


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
