"""Optimal cash injections under a cumulative budget."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lp
from .dynamic import (PRORATA, PaymentPlan, Trajectory, _extract_plan, build_multistage_lp,
                      simulate)
from .network import Scenario
from .static import SolverFailure

TOL_LEMMA = 1e-5


@dataclass(frozen=True, eq=False)
class ControlSolution:
    plan: PaymentPlan
    injections: np.ndarray      # u(t), shape (T, N); sink column is zero
    budget_used: np.ndarray     # B(t)
    objective: float            # J
    trajectory: Trajectory
    lp_objective: float

    @property
    def total_injection(self) -> float:
        return float(self.injections.sum())

    @property
    def total_loss(self) -> float:
        return self.trajectory.total_loss


def effective_inflows(scenario: Scenario, injections) -> np.ndarray:
    return scenario.inflows + np.asarray(injections, dtype=float)


def solve_control(scenario: Scenario, mode: str = PRORATA) -> ControlSolution:
    """Jointly optimal payments and injections minimizing the weighted objective."""
    model = build_multistage_lp(scenario.network, scenario.inflows, scenario.alpha, mode=mode,
                                eta=scenario.eta, gamma=scenario.gamma, budget=scenario.budget)
    sol = lp.solve(model.problem)
    if not sol.optimal:
        raise SolverFailure(sol, "control problem")
    return _assemble(scenario, model, sol)


def _assemble(scenario, model, sol) -> ControlSolution:
    net = scenario.network
    plan = _extract_plan(net, model, sol.x)
    u = np.zeros_like(scenario.inflows)
    u[:, :net.n] = sol.x[model.injection_index]
    return control_solution(scenario, plan, u, lp_objective=sol.objective + model.constant)


def control_solution(scenario: Scenario, plan: PaymentPlan, injections,
                     lp_objective: float = float("nan")) -> ControlSolution:
    """Wrap a given plan and injection sequence, simulating its trajectory."""
    u = np.asarray(injections, dtype=float)
    traj = simulate(scenario.network, plan, effective_inflows(scenario, u), scenario.alpha)
    B = np.cumsum(u.sum(axis=1))
    J = traj.objective(scenario.eta, scenario.gamma, u)
    return ControlSolution(plan, u, B, J, traj, lp_objective)


@dataclass(frozen=True)
class LemmaReport:
    applicable: bool
    priority_rule: bool | None = None      # statement 1
    immediate_use: bool | None = None      # statement 2
    no_late_injection: bool | None = None  # statement 3
    details: tuple = ()

    @property
    def passed(self) -> bool:
        return self.applicable and bool(self.priority_rule and self.immediate_use and self.no_late_injection)


def check_lemma1(solution: ControlSolution, scenario: Scenario, tol: float = TOL_LEMMA) -> LemmaReport:
    """Post-hoc check of the structural properties every optimum must have.

    1. each bank pays min(due, available cash): no voluntary deferral;
    2. a bank receiving cash at t ends t with zero net worth and had zero net
       worth at every earlier period;
    3. once the budget is left slack at some t* < T-1, nothing is injected later.

    Only meaningful for ``eta < 1`` and ``gamma > 0``.
    """
    if not (0 <= scenario.eta < 1 and scenario.gamma > 0):
        return LemmaReport(False, details=("requires eta in [0, 1) and gamma > 0",))
    traj = solution.trajectory
    n = scenario.network.n
    T = traj.horizon
    u = solution.injections
    P = traj.payments
    w = traj.net_worth
    due = traj.residual.sum(axis=2)
    paid = P.sum(axis=2)
    received = P.sum(axis=1)
    c = traj.inflows
    notes: list[str] = []

    s1 = True
    for t in range(T):
        cash = w[t] + c[t] + received[t]
        target = np.minimum(due[t], cash)
        gap = np.abs(paid[t, :n] - target[:n])
        scale = np.maximum(1.0, np.abs(target[:n]))
        if np.any(gap > tol * scale):
            i = int(np.argmax(gap))
            s1 = False
            notes.append(f"priority rule: bank {i} at t={t} pays {paid[t, i]:.6g}, "
                         f"min(due, cash) = {target[i]:.6g}")

    s2 = True
    for t in range(T):
        for i in np.flatnonzero(u[t, :n] > tol):
            if w[t + 1, i] > tol or np.any(w[:t + 1, i] > tol):
                s2 = False
                notes.append(f"immediate use: bank {i} injected at t={t} keeps net worth "
                             f"{w[:t + 2, i].round(9).tolist()}")

    s3 = True
    F = scenario.budget
    B = solution.budget_used
    for ts in range(T - 1):
        if B[ts] < F[ts] - tol:
            late = u[ts + 1:].sum(axis=1)
            if np.any(late > tol):
                s3 = False
                notes.append(f"late injection: budget slack at t={ts} but {late.round(9).tolist()} injected later")
            break
    return LemmaReport(True, s1, s2, s3, tuple(notes))
