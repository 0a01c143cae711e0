"""Regression runs of the bundled six-bank examples against their reference figures."""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .control import solve_control
from .network import Scenario, load_bundled
from .robust import (EXACT, PAPER, AffinePolicy, RobustInfeasibleError, UncertaintyBox,
                     monte_carlo, solve_robust, worst_case_bounds)
from .static import clear_prorata

SCENARIO_FILES = {
    "single_step": "six_bank_single_period.json",
    "multi_step": "six_bank_multi_period.json",
    "robust_single": "six_bank_robust_single.json",
    "robust_multi": "six_bank_robust_multi.json",
}

# reference figures for the bundled examples
LOSS_SINGLE = 49.92
LOSS_TOL = 0.05
ROW_SUMS_SINGLE = np.array([338.9, 189.62, 229.77, 290.5, 53.09, 173.08])
ROW_SUM_TOL = 0.1
INJECTION_SINGLE = 15.0
INJECTION_MULTI = 19.74
INJECTION_TOL = 0.1
RESIDUAL_TOL = 0.1
NOMINAL_EFFORT = 3.9
WORST_EFFORT = 4.87
EFFORT_TOL = 0.3
MC_SAMPLES = 200

# published affine policy for the single-step robust example (sink column last)
_THETA_REF = 1e-3 * np.array([
    [23, 1.8, 6.5, 0.22, 2.8, 0.32, 0],
    [5, 95, 1.1, 0.049, 0.46, 0.054, 0],
    [1.1, 13, 38, 0.011, 16, 1.8, 0],
    [0.11, 0.75, 1.9, 0.93, 1.7, 0.16, 0],
    [0.086, 1, 3.1, 0, 250, 0.13, 0],
    [0.029, 0.34, 1, 0, 55, 6, 0],
    [0, 0, 0, 0, 0, 0, 0],
])
_GAMMA_REF = -1e-3 * np.array([
    [23, 1.8, 6.6, 0.22, 2.8, 0.32, 0],
    [5.0, 96, 1.1, 0.049, 0.47, 0.055, 0],
    [1.1, 13, 39, 0.011, 16, 1.8, 0],
    [0.11, 0.75, 2, 0.93, 1.7, 0.16, 0],
    [0.087, 1, 3.1, 0, 250, 0.13, 0],
    [0.029, 0.34, 1, 0, 55, 6.1, 0],
    [0, 0, 0, 0, 0, 0, 0],
])
_P_HAT_REF = np.array([348.69, 198.52, 239.40, 294.87, 58.70, 179.35, 0])
_U_HAT_REF = np.array([1.32, 1.49, 0.61, 0.13, 1.31, 0.65, 0])


def reference_policy() -> AffinePolicy:
    """The published single-step robust policy, rounded to the published precision."""
    return AffinePolicy(_P_HAT_REF[None], _U_HAT_REF[None], _THETA_REF[None], _GAMMA_REF[None])


@dataclass(frozen=True)
class Check:
    name: str
    expected: str
    actual: str
    passed: bool


@dataclass(frozen=True)
class ExperimentResult:
    name: str
    checks: tuple[Check, ...]
    runtime: float
    note: str = ""

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


@dataclass(frozen=True)
class SuiteReport:
    results: tuple[ExperimentResult, ...]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def n_passed(self) -> int:
        return sum(r.passed for r in self.results)

    def table(self) -> str:
        lines = [f"{'experiment':<15} {'check':<26} {'expected':<22} {'actual':<22} result"]
        for r in self.results:
            for c in r.checks:
                lines.append(f"{r.name:<15} {c.name:<26} {c.expected:<22} {c.actual:<22} "
                             f"{'PASS' if c.passed else 'FAIL'}")
            tail = f"  ({r.runtime:.2f} s)" + (f"  {r.note}" if r.note else "")
            lines.append(f"{r.name:<15} {'=> ' + ('PASS' if r.passed else 'FAIL')}{tail}")
        lines.append(f"{self.n_passed}/{len(self.results)} experiments pass")
        return "\n".join(lines)


def _near(name, value, target, tol) -> Check:
    return Check(name, f"{target:.6g} +/- {tol:g}", f"{value:.6g}", bool(abs(value - target) <= tol))


def _at_most(name, value, limit) -> Check:
    return Check(name, f"<= {limit:.6g}", f"{value:.6g}", bool(value <= limit))


def single_step(s: Scenario) -> tuple[tuple[Check, ...], str]:
    res = clear_prorata(s.network, s.inflows[0])
    n = s.network.n
    rows = res.outflow[:n]
    dev = float(np.max(np.abs(rows - ROW_SUMS_SINGLE))) if n == len(ROW_SUMS_SINGLE) else np.inf
    sol = solve_control(s)
    return (
        _near("loss without control", res.shortfall, LOSS_SINGLE, LOSS_TOL),
        _at_most("max row-sum deviation", dev, ROW_SUM_TOL),
        _near("total injection", sol.total_injection, INJECTION_SINGLE, INJECTION_TOL),
        _at_most("terminal residual", sol.trajectory.terminal_residual, RESIDUAL_TOL),
    ), ""


def multi_step(s: Scenario) -> tuple[tuple[Check, ...], str]:
    sol = solve_control(s)
    return (
        _near("total injection", sol.total_injection, INJECTION_MULTI, INJECTION_TOL),
        _at_most("terminal residual", sol.trajectory.terminal_residual, RESIDUAL_TOL),
    ), ""


def robust_single(s: Scenario) -> tuple[tuple[Check, ...], str]:
    box = UncertaintyBox.from_scenario(s)
    try:
        sol = solve_robust(s, box, objective_mode=PAPER)
    except RobustInfeasibleError as exc:
        return (Check("status", "Optimal", exc.status.value, False),), ""
    ref = worst_case_bounds(reference_policy(), box, s, PAPER).objective_high
    evals = monte_carlo(sol, s, samples=MC_SAMPLES, seed=0)
    bad = sum(not e.default_free for e in evals)
    return (
        Check("status", "Optimal", sol.status.value, sol.status.value == "Optimal"),
        _at_most("worst-case objective", sol.worst_case_objective, ref + 1e-4),
        Check("default-free samples", f"{MC_SAMPLES}/{MC_SAMPLES}", f"{MC_SAMPLES - bad}/{MC_SAMPLES}", bad == 0),
    ), ""


def robust_multi(s: Scenario) -> tuple[tuple[Check, ...], str]:
    box = UncertaintyBox.from_scenario(s)
    tried = []
    for mode in (PAPER, EXACT):
        try:
            sol = solve_robust(s, box, objective_mode=mode)
        except RobustInfeasibleError as exc:
            tried.append((mode, (Check(f"status [{mode}]", "Optimal", exc.status.value, False),)))
            continue
        checks = (
            _near(f"nominal effort [{mode}]", sol.nominal_effort, NOMINAL_EFFORT, EFFORT_TOL),
            _near(f"worst-case effort [{mode}]", sol.worst_case_effort, WORST_EFFORT, EFFORT_TOL),
        )
        if all(c.passed for c in checks):
            return checks, f"achieved in {mode} mode"
        tried.append((mode, checks))
    return tuple(c for _, cs in tried for c in cs), "no objective mode matches"


EXPERIMENTS: dict[str, Callable[[Scenario], tuple[tuple[Check, ...], str]]] = {
    "single_step": single_step,
    "multi_step": multi_step,
    "robust_single": robust_single,
    "robust_multi": robust_multi,
}


def run_paper_suite(scenarios: Mapping[str, Scenario] | None = None) -> SuiteReport:
    """Run the four bundled experiments; ``scenarios`` overrides individual inputs."""
    scenarios = dict(scenarios or {})
    unknown = set(scenarios) - set(EXPERIMENTS)
    if unknown:
        raise KeyError(f"unknown experiments: {sorted(unknown)}")
    results = []
    for name, run in EXPERIMENTS.items():
        s = scenarios.get(name) or load_bundled(SCENARIO_FILES[name])
        t0 = time.perf_counter()
        checks, note = run(s)
        results.append(ExperimentResult(name, checks, time.perf_counter() - t0, note))
    return SuiteReport(tuple(results))
