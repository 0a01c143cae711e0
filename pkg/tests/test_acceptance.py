"""Acceptance criteria, one reference PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v``; the lines are reference even
when output capture is on.
"""
import time

import numpy as np
import pytest

from claritas.control import check_lemma1, solve_control
from claritas.lp import LpStatus, solve
from claritas.network import load_bundled, pro_rata_matrix
from claritas.robust import (EXACT, PAPER, UncertaintyBox, adversarial_realization, evaluate_policy,
                             monte_carlo, solve_robust, worst_case_bounds)
from claritas.static import clear_prorata
from claritas.suite import reference_policy
from conftest import random_network, random_scenario
from oracles import picard, vertex_enumeration
from test_lp import _random_lp

ROW_SUMS_REFERENCE = np.array([338.9, 189.62, 229.77, 290.5, 53.09, 173.08])
PROPERTY_TIMES: dict[str, float] = {}


@pytest.fixture
def report(capsys):
    def emit(label: str, ok: bool, detail: str, seconds: float, limit: float):
        line = f"CRITERION {label}: {'PASS' if ok else 'FAIL'}  {detail}  [{seconds:.2f} s, limit {limit:g} s]"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
    return emit


def test_criterion_1_static_loss(report):
    t0 = time.perf_counter()
    s = load_bundled("six_bank_single_period.json")
    res = clear_prorata(s.network, s.inflows[0])
    dt = time.perf_counter() - t0
    dev = float(np.max(np.abs(res.vector[:6] - ROW_SUMS_REFERENCE)))
    ok = abs(res.shortfall - 49.92) <= 0.05 and dev <= 0.1 and dt < 1
    report("1", ok, f"total loss {res.shortfall:.6g} (49.92 +/- 0.05), max row-sum deviation {dev:.3g} (<= 0.1)",
           dt, 1)


def test_criterion_2_single_period_control(report):
    t0 = time.perf_counter()
    s = load_bundled("six_bank_single_period.json")
    sol = solve_control(s)
    dt = time.perf_counter() - t0
    res = sol.trajectory.terminal_residual
    ok = abs(sol.total_injection - 15) <= 0.1 and abs(res) <= 0.1 and dt < 1
    report("2", ok, f"total injection {sol.total_injection:.6g} (15 +/- 0.1), terminal residual {res:.3g}", dt, 1)


def test_criterion_3_multi_stage_control(report):
    t0 = time.perf_counter()
    s = load_bundled("six_bank_multi_period.json")
    sol = solve_control(s)
    dt = time.perf_counter() - t0
    res = sol.trajectory.terminal_residual
    ok = abs(sol.total_injection - 19.74) <= 0.1 and abs(res) <= 0.1 and dt < 5
    report("3", ok, f"total injection {sol.total_injection:.6g} (19.74 +/- 0.1), terminal residual {res:.3g}",
           dt, 5)


def test_criterion_4_single_step_robust(report):
    t0 = time.perf_counter()
    s = load_bundled("six_bank_robust_single.json")
    sol = solve_robust(s, objective_mode=PAPER)
    box = UncertaintyBox.from_scenario(s)
    ref = worst_case_bounds(reference_policy(), box, s, PAPER).objective_high
    evals = monte_carlo(sol, s, samples=200, seed=0)
    dt = time.perf_counter() - t0
    good = sum(e.default_free for e in evals)
    ok = sol.status is LpStatus.OPTIMAL and sol.worst_case_objective <= ref + 1e-4 and good == 200 and dt < 10
    report("4", ok, f"status {sol.status.value}, J_bar {sol.worst_case_objective:.6g} <= reference-policy "
           f"J_bar {ref:.6g}, Monte Carlo default-free {good}/200", dt, 10)


def test_criterion_5_multi_step_robust(report):
    t0 = time.perf_counter()
    s = load_bundled("six_bank_robust_multi.json")
    seen = []
    achieved = None
    for mode in (PAPER, EXACT):
        sol = solve_robust(s, objective_mode=mode)
        nom, worst = sol.nominal_effort, sol.worst_case_effort
        seen.append(f"{mode}: nominal {nom:.4g}, worst case {worst:.4g}")
        if abs(nom - 3.9) <= 0.3 and abs(worst - 4.87) <= 0.3:
            achieved = mode
            break
    dt = time.perf_counter() - t0
    ok = achieved is not None and dt < 30
    report("5", ok, f"{'; '.join(seen)} (3.9 / 4.87 +/- 0.3); achieved in {achieved} mode", dt, 30)


def _timed(key, fn):
    t0 = time.perf_counter()
    detail = fn()
    PROPERTY_TIMES[key] = time.perf_counter() - t0
    return detail, PROPERTY_TIMES[key]


def test_criterion_6a_lp_vs_vertex_enumeration(report):
    def run():
        # draw until 30 feasible instances; infeasible draws must agree on status too
        rng = np.random.default_rng(2024)
        worst, compared, infeasible = 0.0, 0, 0
        while compared < 30:
            prob, data = _random_lp(rng)
            ref = vertex_enumeration(*data)
            sol = solve(prob)
            if ref is None:
                assert sol.status is LpStatus.INFEASIBLE
                infeasible += 1
                continue
            worst = max(worst, abs(sol.objective - ref))
            compared += 1
        return worst, compared, infeasible
    (worst, compared, infeasible), dt = _timed("a", run)
    report("6a", worst <= 1e-8, f"{compared} random feasible LPs, max |obj - vertex optimum| {worst:.2e} "
           f"(<= 1e-8); {infeasible} infeasible draws agree", dt, 120)


def test_criterion_6b_prorata_vs_fixed_point(report):
    def run():
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(50):
            net = random_network(rng, int(rng.integers(1, 9)))
            c = np.zeros(net.size)
            c[:net.n] = rng.uniform(0, 80, net.n) * (rng.random(net.n) < 0.7)
            ref = picard(net.nominal_outflows, pro_rata_matrix(net), c)
            worst = max(worst, float(np.max(np.abs(clear_prorata(net, c).vector - ref))))
        return worst
    worst, dt = _timed("b", run)
    report("6b", worst <= 1e-6, f"50 random networks, max |LP - fixed point| {worst:.2e} (<= 1e-6)", dt, 120)


def test_criterion_6c_lemma_checker(report):
    def run():
        rng = np.random.default_rng(41)
        passed = 0
        for _ in range(20):
            s = random_scenario(rng, int(rng.integers(2, 7)), int(rng.integers(1, 5)), eta=0.9, gamma=1.0)
            passed += check_lemma1(solve_control(s), s).passed
        return passed
    passed, dt = _timed("c", run)
    report("6c", passed == 20, f"structural checks pass on {passed}/20 random optima", dt, 120)


def test_criterion_6d_robust_soundness_and_tightness(report):
    # the realized objective is bounded by the exact worst case; the elementwise
    # form used for the paper mode is not an upper bound when Theta and Gamma
    # have opposite signs, so soundness of J_bar is checked with the exact bound
    def run():
        worst_excess, worst_gap, infeasible = -np.inf, 0.0, 0
        for name in ("six_bank_robust_single.json", "six_bank_robust_multi.json"):
            s = load_bundled(name)
            for mode in (PAPER, EXACT):
                sol = solve_robust(s, objective_mode=mode)
                evals = monte_carlo(sol, s, samples=200, seed=5)
                infeasible += sum(not e.feasible for e in evals)
                if mode == EXACT:
                    worst_excess = max(worst_excess, max(e.objective for e in evals) - sol.worst_case_objective)
                pol, box, b = sol.policy, sol.box, sol.bounds
                for t in range(pol.horizon):
                    for i in range(s.network.n):
                        d = adversarial_realization(pol, box, s, "payment", t, i)
                        worst_gap = max(worst_gap, abs(pol.payments(d)[t, i] - b.payments_low[t, i]))
                        d = adversarial_realization(pol, box, s, "injection", t, i)
                        worst_gap = max(worst_gap, abs(pol.injections(d)[t, i] - b.injections_low[t, i]))
                        d = adversarial_realization(pol, box, s, "wealth", t, i)
                        w = evaluate_policy(pol, d, s, box).trajectory.net_worth[t + 1, i]
                        worst_gap = max(worst_gap, abs(w - b.wealth_low[t, i]))
                        d = adversarial_realization(pol, box, s, "cumulative", t, i)
                        p = pol.payments(d)
                        cum = sum(s.alpha ** (t - k) * p[k, i] for k in range(t + 1))
                        worst_gap = max(worst_gap, abs(cum - b.cumulative_high[t, i]))
        return worst_excess, worst_gap, infeasible
    (excess, gap, infeasible), dt = _timed("d", run)
    ok = excess <= 1e-4 and gap <= 1e-6 and infeasible == 0
    report("6d", ok, f"max realized J - J_bar (exact bound) {excess:.2e} (<= 1e-4), infeasible samples "
           f"{infeasible}/800, max adversarial-vertex gap {gap:.2e} (<= 1e-6)", dt, 120)


def test_criterion_6e_budget_monotonicity(report):
    def run():
        rng = np.random.default_rng(47)
        worst = -np.inf
        for _ in range(10):
            T = int(rng.integers(1, 4))
            s = random_scenario(rng, int(rng.integers(2, 7)), T)
            bigger = s.replace(budget=s.budget + np.cumsum(rng.uniform(0, 20, T)))
            worst = max(worst, solve_control(bigger).objective - solve_control(s).objective)
        return worst
    worst, dt = _timed("e", run)
    report("6e", worst <= 1e-7, f"10 nested budget pairs, max J(larger F) - J(F) {worst:.2e} (<= 1e-7)", dt, 120)


def test_criterion_6_total_runtime(report):
    total = sum(PROPERTY_TIMES.values())
    ok = set(PROPERTY_TIMES) == set("abcde") and total < 120
    report("6", ok, f"property suites {''.join(sorted(PROPERTY_TIMES))} completed", total, 120)
