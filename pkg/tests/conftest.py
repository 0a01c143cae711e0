import numpy as np
import pytest

from claritas.network import FinancialNetwork, Scenario, load_bundled


def random_network(rng, n, density=0.5, scale=100.0) -> FinancialNetwork:
    L = rng.uniform(1, scale, (n, n)) * (rng.random((n, n)) < density)
    np.fill_diagonal(L, 0.0)
    ext = rng.uniform(0, scale, n) * (rng.random(n) < 0.7)
    return FinancialNetwork.from_banks(L.round(2), ext.round(2))


def random_scenario(rng, n, T, eta=0.9, gamma=1.0, alpha=None, budget=None) -> Scenario:
    net = random_network(rng, n)
    e = np.zeros((T, n + 1))
    e[:, :n] = rng.uniform(0, 60, (T, n)).round(2) * (rng.random((T, n)) < 0.7)
    if alpha is None:
        alpha = float(rng.choice([1.0, 1.01, 1.05]))
    if budget is None:
        budget = np.cumsum(rng.uniform(0, 30, T)).round(2)
    return Scenario(net, e, budget, alpha=alpha, eta=eta, gamma=gamma)


@pytest.fixture(scope="session")
def single():
    return load_bundled("six_bank_single_period.json")


@pytest.fixture(scope="session")
def multi():
    return load_bundled("six_bank_multi_period.json")


@pytest.fixture(scope="session")
def robust_single():
    return load_bundled("six_bank_robust_single.json")


@pytest.fixture(scope="session")
def robust_multi():
    return load_bundled("six_bank_robust_multi.json")
