"""Robust control with affine recourse under box-bounded inflow errors.

Realized inflows are ``e(t) = e_hat(t) + d(t)`` with ``|d(t)| <= r(t)``.
Payments and injections react linearly to the error,
``p(t) = p_hat(t) + Theta(t) d(t)`` and ``u(t) = u_hat(t) + Gamma(t) d(t)``,
and every constraint must hold for all errors in the box. Worst cases over
the box have closed forms in elementwise absolute values, so the robust
problem stays a single LP (epigraph variable per absolute value).

Only pro-rata payments are supported.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lp
from .dynamic import PRORATA, PaymentPlan, Trajectory, simulate, terminal_weights
from .network import Scenario, Violation, pro_rata_matrix

PAPER, EXACT = "paper", "exact"
TOL = 1e-7


class UnsupportedModeError(ValueError):
    pass


class RobustInfeasibleError(RuntimeError):
    def __init__(self, status: lp.LpStatus, diagnosis: list[str]):
        self.status = status
        self.diagnosis = diagnosis
        super().__init__(f"robust program {status.value}: " + ("; ".join(diagnosis) or "no bound family "
                                                                 "violated at the zero policy"))


def _check_objective_mode(mode: str) -> str:
    if mode not in (PAPER, EXACT):
        raise ValueError(f"objective mode must be {PAPER!r} or {EXACT!r}, got {mode!r}")
    return mode


@dataclass(frozen=True, eq=False)
class UncertaintyBox:
    nominal: np.ndarray   # e_hat(t), (T, N)
    radii: np.ndarray     # r(t) = eps(t) e_hat(t)

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "UncertaintyBox":
        if scenario.uncertainty is None:
            raise ValueError("scenario has no uncertainty levels")
        e = np.asarray(scenario.inflows, dtype=float)
        return cls(e, scenario.uncertainty[:, None] * e)

    @property
    def horizon(self) -> int:
        return self.nominal.shape[0]

    def contains(self, d, tol: float = 1e-12) -> bool:
        d = np.asarray(d, dtype=float)
        return d.shape == self.radii.shape and bool(np.all(np.abs(d) <= self.radii + tol))

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-1.0, 1.0, self.radii.shape) * self.radii


@dataclass(frozen=True, eq=False)
class AffinePolicy:
    p_hat: np.ndarray     # (T, N)
    u_hat: np.ndarray     # (T, N)
    theta: np.ndarray     # (T, N, N)
    gamma: np.ndarray     # (T, N, N)

    @property
    def horizon(self) -> int:
        return self.p_hat.shape[0]

    def payments(self, d) -> np.ndarray:
        return self.p_hat + np.einsum("tij,tj->ti", self.theta, d)

    def injections(self, d) -> np.ndarray:
        return self.u_hat + np.einsum("tij,tj->ti", self.gamma, d)

    @classmethod
    def zero(cls, T: int, N: int) -> "AffinePolicy":
        return cls(np.zeros((T, N)), np.zeros((T, N)), np.zeros((T, N, N)), np.zeros((T, N, N)))


@dataclass(frozen=True, eq=False)
class WorstCaseBounds:
    payments_low: np.ndarray     # min over the box of p(t)
    injections_low: np.ndarray   # min of u(t)
    wealth_low: np.ndarray       # min of w(t+1), row t
    wealth_nominal: np.ndarray   # w_hat(t+1)
    budget_high: np.ndarray      # max of B(t)
    cumulative_high: np.ndarray  # max of sum_k alpha^(t-k) p(k)
    cumulative_limit: np.ndarray # alpha^t pbar
    objective_high: float        # J-bar
    objective_nominal: float     # J(p_hat, u_hat)
    beta: np.ndarray
    objective_mode: str

    def violations(self, budget, tol: float = TOL) -> list[Violation]:
        out = []
        checks = [("payments_low", self.payments_low < -tol),
                  ("injections_low", self.injections_low < -tol),
                  ("wealth_low", self.wealth_low < -tol),
                  ("budget_high", self.budget_high > np.asarray(budget) + tol),
                  ("cumulative_high", self.cumulative_high > self.cumulative_limit + tol)]
        for name, mask in checks:
            if np.any(mask):
                out.append(Violation(name, tuple(map(int, np.argwhere(mask)[0])),
                                     f"worst-case {name.replace('_', ' ')} bound violated"))
        return out

    @property
    def worst_case_effort(self) -> float:
        return float(self.budget_high[-1])


@dataclass(frozen=True, eq=False)
class RobustSolution:
    policy: AffinePolicy
    bounds: WorstCaseBounds
    box: UncertaintyBox
    objective_mode: str
    lp_objective: float
    status: lp.LpStatus = lp.LpStatus.OPTIMAL
    epigraph: dict = field(default_factory=dict)

    @property
    def worst_case_objective(self) -> float:
        return self.bounds.objective_high

    @property
    def nominal_effort(self) -> float:
        return float(self.policy.u_hat.sum())

    @property
    def worst_case_effort(self) -> float:
        return self.bounds.worst_case_effort


def _wealth_sensitivity(A: np.ndarray, theta: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """I + Gamma + (A^T - I) Theta, per period."""
    N = A.shape[0]
    eye = np.eye(N)
    return eye[None] + gamma + np.einsum("ij,tjk->tik", A.T - eye, theta)


def worst_case_bounds(policy: AffinePolicy, box: UncertaintyBox, scenario: Scenario,
                      objective_mode: str = PAPER) -> WorstCaseBounds:
    """Closed-form extremes of the policy-dependent quantities over the box.

    ``objective_mode="paper"`` charges the objective with
    ``sum |beta_t Theta + gamma Gamma| r`` and the budget with ``sum |Gamma| r``,
    entry by entry. ``"exact"`` uses the true box maxima,
    ``sum_j |sum_i (gamma Gamma_ij - beta_t Theta_ij)| r_j`` and
    ``sum_j |sum_i Gamma_ij| r_j``.
    """
    _check_objective_mode(objective_mode)
    net = scenario.network
    A = pro_rata_matrix(net)
    T = policy.horizon
    alpha = scenario.alpha
    r = box.radii
    pbar = net.nominal_outflows
    beta = terminal_weights(alpha, T, scenario.eta)
    g = scenario.gamma
    th, ga = policy.theta, policy.gamma

    p_low = policy.p_hat - np.einsum("tij,tj->ti", np.abs(th), r)
    u_low = policy.u_hat - np.einsum("tij,tj->ti", np.abs(ga), r)
    if objective_mode == PAPER:
        spread = np.einsum("tij,tj->t", np.abs(ga), r)
        obj_spread = np.einsum("tij,tj->t", np.abs(beta[:, None, None] * th + g * ga), r)
    else:
        spread = np.einsum("tj,tj->t", np.abs(ga.sum(axis=1)), r)
        obj_spread = np.einsum("tj,tj->t", np.abs((g * ga - beta[:, None, None] * th).sum(axis=1)), r)
    B_high = np.cumsum(policy.u_hat.sum(axis=1) + spread)

    flows = box.nominal + policy.u_hat + policy.p_hat @ A - policy.p_hat
    w_hat = np.cumsum(flows, axis=0)
    M = _wealth_sensitivity(A, th, ga)
    w_low = w_hat - np.cumsum(np.einsum("tij,tj->ti", np.abs(M), r), axis=0)

    high_pay = policy.p_hat + np.einsum("tij,tj->ti", np.abs(th), r)
    cum = np.zeros_like(high_pay)
    for t in range(T):
        cum[t] = sum(alpha ** (t - k) * high_pay[k] for k in range(t + 1))
    limit = alpha ** np.arange(T)[:, None] * pbar[None]

    J_nom = float(beta[0] * pbar.sum() - np.sum(beta * policy.p_hat.sum(axis=1)) + g * policy.u_hat.sum())
    return WorstCaseBounds(p_low, u_low, w_low, w_hat, B_high, cum, limit,
                           J_nom + float(obj_spread.sum()), J_nom, beta, objective_mode)


def solve_robust(scenario: Scenario, box: UncertaintyBox | None = None, objective_mode: str = PAPER,
                 mode: str = PRORATA, **solver_options) -> RobustSolution:
    """Optimal affine policy for the worst-case control problem, as one LP."""
    if mode != PRORATA:
        raise UnsupportedModeError("robust control is only available for pro-rata payments")
    _check_objective_mode(objective_mode)
    box = box or UncertaintyBox.from_scenario(scenario)
    net = scenario.network
    A = pro_rata_matrix(net)
    n, N = net.n, net.size
    T = box.horizon
    alpha, g = scenario.alpha, scenario.gamma
    beta = terminal_weights(alpha, T, scenario.eta)
    pbar = net.nominal_outflows
    r = box.radii
    F = np.asarray(scenario.budget, dtype=float)
    prob = lp.LpProblem(f"robust_{objective_mode}")

    # uncertain columns per period; certain inflows need no reaction terms
    cols = [np.flatnonzero(r[t, :n] > 0) for t in range(T)]
    p_hat = np.empty((T, n), dtype=int)
    u_hat = np.empty((T, n), dtype=int)
    theta: list[np.ndarray] = []
    gam: list[np.ndarray] = []
    for t in range(T):
        m = cols[t].size
        p_hat[t] = prob.add_variables(n, lower=0.0, upper=alpha ** t * pbar[:n], cost=-beta[t], name=f"p_hat{t}")
        u_hat[t] = prob.add_variables(n, lower=0.0, cost=g, name=f"u_hat{t}")
        theta.append(prob.add_variables((n, m), lower=None, name=f"theta{t}"))
        gam.append(prob.add_variables((n, m), lower=None, name=f"gamma{t}"))

    abs_theta, abs_gamma, abs_wealth, abs_obj, abs_budget = [], [], [], [], []
    for t in range(T):
        m = cols[t].size
        th, ga = theta[t], gam[t]
        at = np.empty((n, m), dtype=int)
        ag = np.empty((n, m), dtype=int)
        aw = np.empty((n, m), dtype=int)
        for i in range(n):
            for k in range(m):
                at[i, k] = lp.add_abs_epigraph(prob, {int(th[i, k]): 1.0}, name=f"|theta{t}[{i},{k}]|")
                ag[i, k] = lp.add_abs_epigraph(prob, {int(ga[i, k]): 1.0}, name=f"|gamma{t}[{i},{k}]|")
                j = cols[t][k]
                # row i of (I + Gamma + (A^T - I) Theta), column j
                row = {int(ga[i, k]): 1.0}
                for l in range(n):
                    coef = A[l, i] - (1.0 if l == i else 0.0)
                    if coef != 0:
                        row[int(th[l, k])] = row.get(int(th[l, k]), 0.0) + coef
                aw[i, k] = lp.add_abs_epigraph(prob, row, 1.0 if i == j else 0.0, name=f"|W{t}[{i},{j}]|")
        abs_theta.append(at)
        abs_gamma.append(ag)
        abs_wealth.append(aw)

        rt = r[t, cols[t]]
        if objective_mode == PAPER:
            aj = np.empty((n, m), dtype=int)
            for i in range(n):
                for k in range(m):
                    aj[i, k] = lp.add_abs_epigraph(prob, {int(th[i, k]): beta[t], int(ga[i, k]): g},
                                                   name=f"|J{t}[{i},{k}]|")
                    prob.set_cost(int(aj[i, k]), rt[k])
            abs_obj.append(aj)
        else:
            aj = np.empty(m, dtype=int)
            ab = np.empty(m, dtype=int)
            for k in range(m):
                row = {}
                for i in range(n):
                    row[int(ga[i, k])] = g
                    row[int(th[i, k])] = -beta[t]
                aj[k] = lp.add_abs_epigraph(prob, row, name=f"|J{t}[{k}]|")
                prob.set_cost(int(aj[k]), rt[k])
                ab[k] = lp.add_abs_epigraph(prob, {int(ga[i, k]): 1.0 for i in range(n)}, name=f"|B{t}[{k}]|")
            abs_obj.append(aj)
            abs_budget.append(ab)

    for t in range(T):
        rt = r[t, cols[t]]
        for i in range(n):
            row = {int(p_hat[t, i]): 1.0}
            row.update({int(v): -rt[k] for k, v in enumerate(abs_theta[t][i])})
            prob.add_constraint(row, lp.GE, 0.0, f"p_low[{t},{i}]")
            row = {int(u_hat[t, i]): 1.0}
            row.update({int(v): -rt[k] for k, v in enumerate(abs_gamma[t][i])})
            prob.add_constraint(row, lp.GE, 0.0, f"u_low[{t},{i}]")
            if t > 0:
                row = {}
                for k in range(t + 1):
                    f = alpha ** (t - k)
                    row[int(p_hat[k, i])] = f
                    for q, v in enumerate(abs_theta[k][i]):
                        row[int(v)] = f * r[k, cols[k][q]]
                prob.add_constraint(row, lp.LE, alpha ** t * pbar[i], f"due[{t},{i}]")
            else:
                row = {int(p_hat[0, i]): 1.0}
                row.update({int(v): rt[q] for q, v in enumerate(abs_theta[0][i])})
                prob.add_constraint(row, lp.LE, pbar[i], f"due[0,{i}]")
            # worst-case net worth at t+1
            row = {}
            for k in range(t + 1):
                row[int(u_hat[k, i])] = row.get(int(u_hat[k, i]), 0.0) + 1.0
                for l in range(n):
                    coef = A[l, i] - (1.0 if l == i else 0.0)
                    if coef != 0:
                        row[int(p_hat[k, l])] = row.get(int(p_hat[k, l]), 0.0) + coef
                for q, v in enumerate(abs_wealth[k][i]):
                    row[int(v)] = -r[k, cols[k][q]]
            prob.add_constraint(row, lp.GE, -float(box.nominal[:t + 1, i].sum()), f"w_low[{t + 1},{i}]")
        row = {}
        for k in range(t + 1):
            for i in range(n):
                row[int(u_hat[k, i])] = 1.0
            if objective_mode == PAPER:
                for (i, q), v in np.ndenumerate(abs_gamma[k]):
                    row[int(v)] = r[k, cols[k][q]]
            else:
                for q, v in enumerate(abs_budget[k]):
                    row[int(v)] = r[k, cols[k][q]]
        prob.add_constraint(row, lp.LE, F[t], f"budget[{t}]")

    sol = lp.solve(prob, **solver_options)
    if not sol.optimal:
        zero = worst_case_bounds(AffinePolicy.zero(T, N), box, scenario, objective_mode)
        raise RobustInfeasibleError(sol.status, [v.message for v in zero.violations(F)])

    x = sol.x
    P_hat = np.zeros((T, N))
    U_hat = np.zeros((T, N))
    TH = np.zeros((T, N, N))
    GA = np.zeros((T, N, N))
    for t in range(T):
        P_hat[t, :n] = x[p_hat[t]]
        U_hat[t, :n] = x[u_hat[t]]
        TH[t][np.ix_(np.arange(n), cols[t])] = x[theta[t]]
        GA[t][np.ix_(np.arange(n), cols[t])] = x[gam[t]]
    policy = AffinePolicy(P_hat, U_hat, TH, GA)
    bounds = worst_case_bounds(policy, box, scenario, objective_mode)
    epi = {"theta": [x[a] for a in abs_theta], "gamma": [x[a] for a in abs_gamma],
           "wealth": [x[a] for a in abs_wealth], "objective": [x[a] for a in abs_obj],
           "budget": [x[a] for a in abs_budget], "columns": cols}
    return RobustSolution(policy, bounds, box, objective_mode,
                          sol.objective + float(beta[0] * pbar.sum()), sol.status, epi)


# --------------------------------------------------------------------------
# evaluation of a policy on realized errors


@dataclass(frozen=True, eq=False)
class PolicyEvaluation:
    payments: np.ndarray
    injections: np.ndarray
    inflows: np.ndarray
    trajectory: Trajectory
    objective: float
    violations: list

    @property
    def feasible(self) -> bool:
        return not self.violations

    @property
    def default_free(self) -> bool:
        """No node ever ends a period with negative net worth and no bound is broken."""
        return self.feasible


def evaluate_policy(policy: AffinePolicy, d, scenario: Scenario, box: UncertaintyBox | None = None,
                    tol: float = TOL) -> PolicyEvaluation:
    """Apply the policy to the realized error ``d`` and simulate."""
    box = box or UncertaintyBox.from_scenario(scenario)
    d = np.asarray(d, dtype=float)
    if d.shape != box.radii.shape:
        raise ValueError(f"realization must have shape {box.radii.shape}, got {d.shape}")
    if not box.contains(d):
        raise ValueError("realization lies outside the uncertainty box")
    p = policy.payments(d)
    u = policy.injections(d)
    e = box.nominal + d
    traj = simulate(scenario.network, PaymentPlan(PRORATA, p),
                    e + u, scenario.alpha, tol)
    out = list(traj.violations)
    if np.any(u < -tol):
        out.append(Violation("negative_injection", (), f"injection {u.min():.3g} is negative"))
    B = np.cumsum(u.sum(axis=1))
    if np.any(B > np.asarray(scenario.budget) + tol):
        out.append(Violation("budget", (), "cumulative injections exceed the budget"))
    J = traj.objective(scenario.eta, scenario.gamma, u)
    return PolicyEvaluation(p, u, e, traj, J, out)


def monte_carlo(solution: RobustSolution, scenario: Scenario, samples: int = 200,
                seed: int = 0) -> list[PolicyEvaluation]:
    rng = np.random.default_rng(seed)
    return [evaluate_policy(solution.policy, solution.box.sample(rng), scenario, solution.box)
            for _ in range(samples)]


def adversarial_realization(policy: AffinePolicy, box: UncertaintyBox, scenario: Scenario,
                            quantity: str, t: int, i: int) -> np.ndarray:
    """Box vertex driving one row-level quantity to its worst-case bound.

    ``quantity`` is ``"payment"`` (minimize p_i(t)), ``"injection"`` (minimize
    u_i(t)), ``"wealth"`` (minimize w_i(t+1)) or ``"cumulative"`` (maximize
    the discounted payments of bank i up to t).
    """
    r = box.radii
    d = np.zeros_like(r)
    if quantity == "payment":
        d[t] = -np.sign(policy.theta[t, i]) * r[t]
    elif quantity == "injection":
        d[t] = -np.sign(policy.gamma[t, i]) * r[t]
    elif quantity == "wealth":
        M = _wealth_sensitivity(pro_rata_matrix(scenario.network), policy.theta, policy.gamma)
        for k in range(t + 1):
            d[k] = -np.sign(M[k, i]) * r[k]
    elif quantity == "cumulative":
        for k in range(t + 1):
            d[k] = np.sign(policy.theta[k, i]) * r[k]
    else:
        raise ValueError(f"unknown quantity {quantity!r}")
    return d


__all__ = [
    "AffinePolicy", "EXACT", "PAPER", "PolicyEvaluation", "RobustInfeasibleError", "RobustSolution",
    "UncertaintyBox", "UnsupportedModeError", "WorstCaseBounds", "adversarial_realization",
    "evaluate_policy", "monte_carlo", "solve_robust", "worst_case_bounds",
]
