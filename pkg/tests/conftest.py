import numpy as np
import pytest

from bayesnbs.oracles import CoinOracle, ProblemInstance, SimulatedOracle


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run the Monte-Carlo acceptance experiments")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


class ScriptedOracle(CoinOracle):
    """Returns a fixed outcome sequence and records the coins it was asked."""

    def __init__(self, n, outcomes, budget_cap=None):
        super(ScriptedOracle, self).__init__(n, budget_cap)
        self.outcomes = list(outcomes)
        self.asked = []

    def _draw(self, i):
        self.asked.append(i)
        return self.outcomes[len(self.asked) - 1]


class DeterministicOracle(CoinOracle):
    """Coins 1..k always tails, coins k+1..n always heads."""

    def __init__(self, n, crossing, budget_cap=None):
        super(DeterministicOracle, self).__init__(n, budget_cap)
        self.crossing = crossing

    def _draw(self, i):
        return 1 if i > self.crossing else 0

    def _draw_many(self, i, m):
        return m if i > self.crossing else 0


def step_instance(n, crossing, low=0.4, high=0.6, tau=0.5, eps=0.1):
    p = np.where(np.arange(1, n + 1) <= crossing, low, high)
    return ProblemInstance(n, tau, eps, p)


@pytest.fixture
def scripted():
    return ScriptedOracle


@pytest.fixture
def deterministic():
    return DeterministicOracle


@pytest.fixture
def standard_oracle():
    def make(n, crossing, seed=0, budget_cap=None):
        return SimulatedOracle(step_instance(n, crossing), seed=seed, budget_cap=budget_cap)
    return make
