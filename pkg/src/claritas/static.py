"""Single-period clearing payments.

Two LP formulations (free payment matrices and pro-rata payment vectors) plus
the classical decreasing fixed-point iteration, kept as an independent check
on the pro-rata LP.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lp
from .network import FinancialNetwork, _require_valid, pro_rata_matrix

TOL_CHECK = 1e-6


class SolverFailure(RuntimeError):
    def __init__(self, solution: lp.LpSolution, what: str):
        self.solution = solution
        super().__init__(f"{what}: LP solver returned {solution.status.value}")


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ClearingResult:
    payments: np.ndarray          # full payment matrix P
    vector: np.ndarray            # outflows p = P 1
    inflow: np.ndarray            # c + P^T 1
    outflow: np.ndarray
    net_worth: np.ndarray
    shortfall: float
    mode: str
    nominal: np.ndarray           # Pbar 1

    @property
    def defaulted(self) -> np.ndarray:
        return np.flatnonzero(self.shortfall_by_node > TOL_CHECK)

    @property
    def shortfall_by_node(self) -> np.ndarray:
        return self.nominal - self.vector

    def residual(self, network: FinancialNetwork, c) -> float:
        """Sup-norm residual of the clearing relation P1 = min(Pbar 1, c + P^T 1)."""
        target = np.minimum(network.nominal_outflows, np.asarray(c, dtype=float) + self.payments.sum(axis=0))
        return float(np.max(np.abs(self.vector - target)))


def _result(network: FinancialNetwork, P: np.ndarray, c: np.ndarray, mode: str) -> ClearingResult:
    p = P.sum(axis=1)
    phi_in = c + P.sum(axis=0)
    return ClearingResult(
        payments=P, vector=p, inflow=phi_in, outflow=p, net_worth=phi_in - p,
        shortfall=float(network.liabilities.sum() - P.sum()), mode=mode,
        nominal=network.nominal_outflows,
    )


def _check_inflow(network: FinancialNetwork, c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.shape != (network.size,):
        raise ValueError(f"inflow must have length {network.size}, got {c.shape}")
    if np.any(c < 0):
        raise ValueError("inflow must be nonnegative")
    return c


def clear_free(network: FinancialNetwork, c) -> ClearingResult:
    """Clearing payment matrix with no proportionality constraint.

    Maximizes total payments, which is one admissible decreasing objective.
    Only row sums and totals are unique; the matrix itself generally is not.
    """
    _require_valid(network)
    c = _check_inflow(network, c)
    Pbar = network.liabilities
    n = network.n
    prob = lp.LpProblem("clear_free")
    edges = list(zip(*np.nonzero(Pbar > 0)))
    idx = {}
    for i, j in edges:
        idx[i, j] = prob.add_variable(0.0, Pbar[i, j], -1.0, f"P[{i},{j}]")
    for k in range(n):
        row: dict[int, float] = {}
        for (i, j), v in idx.items():
            if i == k:
                row[v] = row.get(v, 0.0) + 1.0
            if j == k:
                row[v] = row.get(v, 0.0) - 1.0
        if row:
            prob.add_constraint(row, lp.LE, c[k], f"balance[{k}]")
    sol = lp.solve(prob)
    if not sol.optimal:
        raise SolverFailure(sol, "free clearing")
    P = np.zeros_like(Pbar)
    for (i, j), v in idx.items():
        P[i, j] = sol.x[v]
    return _result(network, P, c, "free")


def clear_prorata(network: FinancialNetwork, c) -> ClearingResult:
    """Unique clearing vector under proportional payments, via LP."""
    A = pro_rata_matrix(network)
    c = _check_inflow(network, c)
    pbar = network.nominal_outflows
    n = network.n
    prob = lp.LpProblem("clear_prorata")
    p = prob.add_variables(n, lower=0.0, upper=pbar[:n], cost=-1.0, name="p")
    for i in range(n):
        row = {int(p[j]): -A[j, i] for j in range(n) if A[j, i] != 0}
        row[int(p[i])] = row.get(int(p[i]), 0.0) + 1.0
        prob.add_constraint(row, lp.LE, c[i], f"balance[{i}]")
    sol = lp.solve(prob)
    if not sol.optimal:
        raise SolverFailure(sol, "pro-rata clearing")
    vec = np.zeros(network.size)
    vec[:n] = sol.x[p]
    return _result(network, vec[:, None] * A, c, "prorata")


def picard_clearing(network: FinancialNetwork, c, max_iter: int = 100_000,
                    tol: float = 1e-12) -> tuple[np.ndarray, int]:
    """Greatest clearing vector by the iteration p <- min(pbar, c + A^T p).

    Starts from full payment, so iterates decrease monotonically. Returns the
    vector and the number of iterations taken.
    """
    A = pro_rata_matrix(network)
    c = _check_inflow(network, c)
    pbar = network.nominal_outflows
    p = pbar.copy()
    for it in range(1, max_iter + 1):
        nxt = np.minimum(pbar, c + A.T @ p)
        if np.max(np.abs(nxt - p)) <= tol:
            return nxt, it
        p = nxt
    raise ConvergenceError(f"no convergence after {max_iter} iterations (step {np.max(np.abs(nxt - p)):.3g})")
