"""Multi-period clearing.

Unpaid dues roll over to the next period with interest factor ``alpha``;
operations continue to the end of the horizon instead of freezing at the
first default. Everything here works for both free payment matrices and
pro-rata payment vectors.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lp
from .network import FinancialNetwork, Violation, _require_valid, pro_rata_matrix
from .static import SolverFailure

TOL_FEAS = 1e-7
FREE, PRORATA = "free", "prorata"


class InternalConsistencyError(AssertionError):
    """Recursive and closed-form trajectory quantities disagree."""


def _check_mode(mode: str) -> str:
    if mode not in (FREE, PRORATA):
        raise ValueError(f"mode must be {FREE!r} or {PRORATA!r}, got {mode!r}")
    return mode


def discount_coeffs(alpha: float, T: int) -> np.ndarray:
    """Weights a_t = 1 + alpha + ... + alpha^(T-t-1) of period-t payments in the total loss."""
    if not alpha >= 1:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    if T < 1:
        raise ValueError(f"horizon must be >= 1, got {T}")
    t = np.arange(T)
    if alpha == 1:
        return (T - t).astype(float)
    return (alpha ** (T - t) - 1.0) / (alpha - 1.0)


def terminal_weights(alpha: float, T: int, eta: float) -> np.ndarray:
    """beta_t = eta alpha^(T-t) + (1 - eta) a_t, the objective weight of period-t payments."""
    return eta * alpha ** (T - np.arange(T)) + (1 - eta) * discount_coeffs(alpha, T)


@dataclass(frozen=True, eq=False)
class PaymentPlan:
    """Payments per period: ``(T, N, N)`` matrices or ``(T, N)`` pro-rata vectors."""

    mode: str
    payments: np.ndarray

    def __post_init__(self):
        _check_mode(self.mode)
        arr = np.array(self.payments, dtype=float)
        expected = 3 if self.mode == FREE else 2
        if arr.ndim != expected:
            raise ValueError(f"{self.mode} plan needs a {expected}-d array, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "payments", arr)

    @property
    def horizon(self) -> int:
        return self.payments.shape[0]

    def matrices(self, network: FinancialNetwork) -> np.ndarray:
        if self.mode == FREE:
            return self.payments
        A = pro_rata_matrix(network)
        return self.payments[:, :, None] * A[None]

    def vectors(self) -> np.ndarray:
        if self.mode == FREE:
            return self.payments.sum(axis=2)
        return self.payments


@dataclass(frozen=True, eq=False)
class Trajectory:
    payments: np.ndarray            # P(t), t < T
    inflows: np.ndarray             # c(t), t < T
    residual: np.ndarray            # Pbar(t), t <= T
    net_worth: np.ndarray           # w(t), t <= T
    cumulative_inflow: np.ndarray   # C(t), t < T
    losses: np.ndarray              # delta(t)
    total_loss: float
    coeffs: np.ndarray              # a_t
    alpha: float
    violations: list = field(default_factory=list)

    @property
    def horizon(self) -> int:
        return self.payments.shape[0]

    @property
    def residual_vectors(self) -> np.ndarray:
        return self.residual.sum(axis=2)

    @property
    def terminal_residual(self) -> float:
        return float(self.residual[-1].sum())

    @property
    def feasible(self) -> bool:
        return not self.violations

    def objective(self, eta: float, gamma: float, injections=None) -> float:
        """(1 - eta) L + eta 1'Pbar(T)1 + gamma * total injected."""
        injected = 0.0 if injections is None else float(np.sum(injections))
        return (1 - eta) * self.total_loss + eta * self.terminal_residual + gamma * injected


def _inflow_array(network: FinancialNetwork, inflows, T: int) -> np.ndarray:
    c = np.atleast_2d(np.asarray(inflows, dtype=float))
    if c.shape != (T, network.size):
        raise ValueError(f"inflows must have shape {(T, network.size)}, got {c.shape}")
    return c


def simulate(network: FinancialNetwork, plan: PaymentPlan, inflows, alpha: float = 1.0,
             tol: float = TOL_FEAS) -> Trajectory:
    """Run the wealth and rolled-over-liability recursions under ``plan``.

    Never refuses a plan: bound or solvency breaches are recorded in
    ``Trajectory.violations``. Raises :class:`InternalConsistencyError` if the
    recursion disagrees with the closed-form expressions.
    """
    _require_valid(network)
    P = plan.matrices(network)
    T = plan.horizon
    c = _inflow_array(network, inflows, T)
    N = network.size
    Pbar0 = network.liabilities

    residual = np.empty((T + 1, N, N))
    wealth = np.zeros((T + 1, N))
    residual[0] = Pbar0
    violations: list[Violation] = []
    for t in range(T):
        wealth[t + 1] = wealth[t] + c[t] + P[t].sum(axis=0) - P[t].sum(axis=1)
        residual[t + 1] = alpha * (residual[t] - P[t])
        if np.any(P[t] < -tol):
            violations.append(Violation("negative_payment", (t,), f"period {t}: negative payment"))
        over = P[t] - residual[t]
        if np.any(over > tol):
            i, j = np.unravel_index(np.argmax(over), over.shape)
            violations.append(Violation("over_payment", (t, int(i), int(j)),
                                        f"period {t}: payment {i}->{j} exceeds due by {over[i, j]:.3g}"))
        if np.any(wealth[t + 1] < -tol):
            i = int(np.argmin(wealth[t + 1]))
            violations.append(Violation("negative_wealth", (t, i),
                                        f"period {t}: net worth of node {i} falls to {wealth[t + 1, i]:.6g}"))

    coeffs = discount_coeffs(alpha, T)
    C = np.cumsum(c, axis=0)
    losses = (residual[:T] - P).sum(axis=(1, 2))
    total = float(losses.sum())

    # closed forms
    scale = max(1.0, float(np.abs(residual).max()), float(np.abs(C).max()))
    atol = 1e-9 * scale
    net_out = P.sum(axis=1) - P.sum(axis=2)  # (P^T - P) 1 per period
    for t in range(T + 1):
        closed_res = alpha ** t * Pbar0 - sum(alpha ** (t - k) * P[k] for k in range(t))
        if not np.allclose(residual[t], closed_res, rtol=0, atol=atol):
            raise InternalConsistencyError(f"residual liabilities at t={t} disagree with closed form")
        if t > 0:
            closed_w = C[t - 1] + net_out[:t].sum(axis=0)
            if not np.allclose(wealth[t], closed_w, rtol=0, atol=atol):
                raise InternalConsistencyError(f"net worth at t={t} disagrees with closed form")
    closed_L = coeffs[0] * Pbar0.sum() - float(coeffs @ P.sum(axis=(1, 2)))
    if abs(closed_L - total) > atol * max(1, T):
        raise InternalConsistencyError(f"total loss {total} disagrees with closed form {closed_L}")

    return Trajectory(P, c, residual, wealth, C, losses, total, coeffs, float(alpha), violations)


@dataclass(frozen=True)
class FeasibilityReport:
    ok: bool
    violations: list

    def __bool__(self) -> bool:
        return self.ok


def feasible(network: FinancialNetwork, plan: PaymentPlan, inflows, alpha: float = 1.0,
             tol: float = TOL_FEAS) -> FeasibilityReport:
    """Check the explicit (cumulative) constraints on a payment sequence."""
    _require_valid(network)
    T = plan.horizon
    c = _inflow_array(network, inflows, T)
    out: list[Violation] = []
    if plan.mode == FREE:
        X = plan.payments
        bound = network.liabilities
        flows = X.sum(axis=1) - X.sum(axis=2)
    else:
        A = pro_rata_matrix(network)
        X = plan.payments
        bound = network.nominal_outflows
        flows = X @ A - X
    if np.any(X < -tol):
        out.append(Violation("negative_payment", (), "some payment is negative"))
    C = np.cumsum(c, axis=0)
    for t in range(T):
        cum = sum(alpha ** (t - k) * X[k] for k in range(t + 1))
        excess = cum - alpha ** t * bound
        if np.any(excess > tol):
            idx = np.unravel_index(np.argmax(excess), excess.shape)
            out.append(Violation("liability_bound", (t, *map(int, idx)),
                                 f"period {t}: cumulative payments exceed liabilities at {tuple(map(int, idx))} "
                                 f"by {excess[idx]:.3g}"))
        w = C[t] + flows[:t + 1].sum(axis=0)
        if np.any(w < -tol):
            i = int(np.argmin(w))
            out.append(Violation("negative_wealth", (t, i), f"period {t}: node {i} net worth {w[i]:.6g}"))
    return FeasibilityReport(not out, out)


# --------------------------------------------------------------------------
# LP model shared by multi-period clearing and nominal control


@dataclass
class MultistageModel:
    problem: lp.LpProblem
    mode: str
    payment_index: np.ndarray       # (T, n) for prorata; (T, n_edges) for free
    edges: list                     # (i, j) per free-mode payment column
    injection_index: np.ndarray | None
    constant: float


def build_multistage_lp(network: FinancialNetwork, inflows, alpha: float = 1.0, *, mode: str = PRORATA,
                        eta: float = 0.0, gamma: float = 0.0, budget=None) -> MultistageModel:
    """Assemble the multi-period LP.

    Minimizes ``(1-eta) L + eta 1'Pbar(T)1 + gamma B(T-1)``. Injection
    variables are created only when ``budget`` is given. Variables are laid out
    period by period: payments (row-major over creditor edges), then
    injections.
    """
    _check_mode(mode)
    _require_valid(network)
    e = np.atleast_2d(np.asarray(inflows, dtype=float))
    T = e.shape[0]
    e = _inflow_array(network, e, T)
    n = network.n
    Pbar = network.liabilities
    beta = terminal_weights(alpha, T, eta)
    prob = lp.LpProblem(f"multistage_{mode}")

    if mode == FREE:
        edges = [(int(i), int(j)) for i, j in zip(*np.nonzero(Pbar > 0))]
        bound = np.array([Pbar[i, j] for i, j in edges])
    else:
        A = pro_rata_matrix(network)
        edges = []
        bound = network.nominal_outflows[:n]

    pay = np.empty((T, len(edges) if mode == FREE else n), dtype=int)
    inj = None if budget is None else np.empty((T, n), dtype=int)
    for t in range(T):
        # cumulative bound implies payments never exceed alpha^t * nominal
        pay[t] = prob.add_variables(pay.shape[1], lower=0.0, upper=alpha ** t * bound,
                                    cost=-beta[t], name=f"pay{t}")
        if inj is not None:
            inj[t] = prob.add_variables(n, lower=0.0, cost=gamma, name=f"u{t}")

    for t in range(1, T):
        for col in range(pay.shape[1]):
            row = {int(pay[k, col]): alpha ** (t - k) for k in range(t + 1)}
            prob.add_constraint(row, lp.LE, alpha ** t * bound[col], f"due[{t},{col}]")

    # net outflow coefficients of each payment column for each bank
    flow = np.zeros((n, pay.shape[1]))
    if mode == FREE:
        for col, (i, j) in enumerate(edges):
            flow[i, col] -= 1.0
            if j < n:
                flow[j, col] += 1.0
    else:
        flow = A[:n, :n].T - np.eye(n)
    for t in range(T):
        for i in range(n):
            row: dict[int, float] = {}
            for k in range(t + 1):
                for col in np.flatnonzero(flow[i]):
                    row[int(pay[k, col])] = row.get(int(pay[k, col]), 0.0) + flow[i, col]
                if inj is not None:
                    row[int(inj[k, i])] = 1.0
            prob.add_constraint(row, lp.GE, -float(e[:t + 1, i].sum()), f"wealth[{t},{i}]")

    if inj is not None:
        F = np.asarray(budget, dtype=float)
        if F.shape != (T,):
            raise ValueError(f"budget must have length {T}")
        for t in range(T):
            prob.add_constraint({int(v): 1.0 for v in inj[:t + 1].ravel()}, lp.LE, F[t], f"budget[{t}]")

    constant = float(beta[0] * Pbar.sum())
    return MultistageModel(prob, mode, pay, edges, inj, constant)


def _extract_plan(network: FinancialNetwork, model: MultistageModel, x: np.ndarray) -> PaymentPlan:
    T = model.payment_index.shape[0]
    N = network.size
    vals = x[model.payment_index]
    if model.mode == FREE:
        P = np.zeros((T, N, N))
        for col, (i, j) in enumerate(model.edges):
            P[:, i, j] = vals[:, col]
        return PaymentPlan(FREE, P)
    p = np.zeros((T, N))
    p[:, :network.n] = vals
    return PaymentPlan(PRORATA, p)


def clear_multistage(network: FinancialNetwork, inflows, alpha: float = 1.0,
                     mode: str = PRORATA) -> tuple[PaymentPlan, Trajectory]:
    """Multi-period clearing payments for fixed inflows (minimum total loss)."""
    model = build_multistage_lp(network, inflows, alpha, mode=mode)
    sol = lp.solve(model.problem)
    if not sol.optimal:
        raise SolverFailure(sol, "multi-period clearing")
    plan = _extract_plan(network, model, sol.x)
    return plan, simulate(network, plan, inflows, alpha)
