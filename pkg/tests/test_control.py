import numpy as np
import pytest

from claritas.control import check_lemma1, control_solution, solve_control
from claritas.dynamic import FREE, PRORATA, PaymentPlan, clear_multistage, simulate
from claritas.network import FinancialNetwork, Scenario
from claritas.static import clear_prorata
from conftest import random_scenario


@pytest.fixture
def one_bank():
    net = FinancialNetwork.from_banks([[0.0]], [10.0])
    return Scenario(net, [[4.0, 0.0]], [50.0], alpha=1.01, eta=0.9, gamma=1.0)


def test_six_bank_single_period(single):
    sol = solve_control(single)
    assert sol.total_injection == pytest.approx(15.0, abs=0.1)
    assert abs(sol.trajectory.terminal_residual) <= 0.1
    assert sol.objective == pytest.approx(15.0, abs=0.1)
    assert sol.objective == pytest.approx(sol.lp_objective, abs=1e-7)
    assert np.all(sol.injections >= -1e-9)
    assert sol.budget_used[0] <= single.budget[0] + 1e-7
    assert sol.trajectory.feasible


def test_reference_injection_pattern_is_optimal(single):
    # the reference pattern (5, 5, 0, 0, 5, 0) reaches the same objective
    u = np.array([[5.0, 5, 0, 0, 5, 0, 0]])
    p = clear_prorata(single.network, single.inflows[0] + u[0]).vector
    alt = control_solution(single, PaymentPlan(PRORATA, p[None]), u)
    assert alt.trajectory.terminal_residual == pytest.approx(0, abs=1e-6)
    assert alt.objective == pytest.approx(solve_control(single).objective, abs=1e-6)


def test_six_bank_multi_stage(multi):
    sol = solve_control(multi)
    assert sol.total_injection == pytest.approx(19.74, abs=0.1)
    assert abs(sol.trajectory.terminal_residual) <= 0.1
    assert np.all(sol.budget_used <= multi.budget + 1e-7)
    assert check_lemma1(sol, multi).passed


def test_zero_budget_is_uncontrolled_clearing(multi, single):
    for s in (multi, single):
        zero = s.replace(budget=np.zeros(s.horizon), eta=0.0)
        sol = solve_control(zero)
        assert np.all(sol.injections == 0)
        _, traj = clear_multistage(s.network, s.inflows, s.alpha)
        assert sol.objective == pytest.approx(traj.total_loss, abs=1e-6)
    sol = solve_control(multi.replace(budget=np.zeros(3)))
    assert np.abs(sol.injections).max() == 0


def _grid_objective(s: Scenario, u: float) -> float:
    c = s.inflows[0] + np.array([u, 0.0])
    p = clear_prorata(s.network, c).vector
    traj = simulate(s.network, PaymentPlan(PRORATA, p[None]), c[None], s.alpha)
    return traj.objective(s.eta, s.gamma, u)


def test_one_bank_inject_vs_default(one_bank):
    sol = solve_control(one_bank)
    assert sol.injections[0, 0] == pytest.approx(6.0)
    assert sol.plan.payments[0, 0] == pytest.approx(10.0)
    assert sol.objective == pytest.approx(6.0)
    grid = np.linspace(0, 10, 1001)
    values = [_grid_objective(one_bank, u) for u in grid]
    assert grid[int(np.argmin(values))] == pytest.approx(6.0)
    assert min(values) == pytest.approx(sol.objective, abs=1e-9)
    # an unpaid unit costs 0.1 + 0.9 * 1.01 = 1.009 > gamma
    assert _grid_objective(one_bank, 5.0) - _grid_objective(one_bank, 6.0) == pytest.approx(0.009)


def test_free_mode_control(single):
    free = solve_control(single, mode=FREE)
    pro = solve_control(single)
    assert free.objective <= pro.objective + 1e-7
    assert free.trajectory.feasible


def test_lemma_on_random_optima():
    rng = np.random.default_rng(41)
    checked = 0
    for _ in range(20):
        s = random_scenario(rng, int(rng.integers(2, 7)), int(rng.integers(1, 5)))
        sol = solve_control(s)
        rep = check_lemma1(sol, s)
        assert rep.applicable
        assert rep.passed, rep.details
        checked += 1
    assert checked == 20


def test_lemma_detects_deferred_payment():
    net = FinancialNetwork.from_banks([[0.0]], [10.0])
    s = Scenario(net, [[20.0, 0.0]], [5.0], alpha=1.0, eta=0.5, gamma=1.0)
    sol = control_solution(s, PaymentPlan(PRORATA, [[5.0, 0.0]]), np.zeros((1, 2)))
    rep = check_lemma1(sol, s)
    assert rep.applicable and rep.priority_rule is False
    assert not rep.passed


def test_lemma_detects_idle_injection():
    net = FinancialNetwork.from_banks([[0.0]], [10.0])
    s = Scenario(net, [[20.0, 0.0]], [5.0], alpha=1.0, eta=0.5, gamma=1.0)
    sol = control_solution(s, PaymentPlan(PRORATA, [[10.0, 0.0]]), [[3.0, 0.0]])
    rep = check_lemma1(sol, s)
    assert rep.immediate_use is False


def test_lemma_not_applicable():
    net = FinancialNetwork.from_banks([[0.0]], [10.0])
    s = Scenario(net, [[4.0, 0.0]], [5.0], eta=1.0, gamma=1.0)
    assert not check_lemma1(solve_control(s), s).applicable
    s = s.replace(eta=0.5, gamma=0.0)
    assert not check_lemma1(solve_control(s), s).applicable


def test_flat_budget_means_no_late_injection():
    rng = np.random.default_rng(43)
    for _ in range(20):
        T = int(rng.integers(2, 5))
        s = random_scenario(rng, int(rng.integers(2, 7)), T, budget=np.full(T, rng.uniform(0, 40)))
        sol = solve_control(s)
        assert np.abs(sol.injections[1:]).max() <= 1e-7


def test_budget_monotonicity():
    rng = np.random.default_rng(47)
    for _ in range(10):
        T = int(rng.integers(1, 4))
        s = random_scenario(rng, int(rng.integers(2, 7)), T)
        bigger = s.replace(budget=s.budget + np.cumsum(rng.uniform(0, 20, T)))
        assert solve_control(bigger).objective <= solve_control(s).objective + 1e-7


def test_control_never_worse_than_no_control():
    rng = np.random.default_rng(53)
    for _ in range(10):
        s = random_scenario(rng, int(rng.integers(2, 6)), int(rng.integers(1, 4)), eta=0.0, gamma=0.0)
        _, traj = clear_multistage(s.network, s.inflows, s.alpha)
        assert solve_control(s).objective <= traj.total_loss + 1e-7
