"""Linear programming engine.

Problems are built incrementally with :class:`LpProblem` and solved by a
two-phase bounded revised simplex (:func:`solve`). Variable bounds are handled
natively: nonbasic variables sit at a finite bound (or at zero when free), so
box constraints never become rows. The basis is kept as a sparse LU
factorization plus product-form updates, refactored periodically.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

TOL_FEAS = 1e-7
TOL_PIVOT = 1e-9
TOL_COST = 1e-9

LE, EQ, GE = "<=", "=", ">="
_RELATIONS = (LE, EQ, GE)


class LpValidationError(ValueError):
    """Malformed problem data (dimension mismatch, inverted bounds, ...)."""


class LpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"


@dataclass(frozen=True)
class Constraint:
    coeffs: Mapping[int, float]
    relation: str
    rhs: float
    name: str | None = None


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    x: np.ndarray | None
    objective: float
    iterations: int
    phase1_objective: float = 0.0

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


def _sparse_row(coeffs, width: int) -> dict[int, float]:
    if isinstance(coeffs, Mapping):
        row: dict[int, float] = {}
        for j, v in coeffs.items():
            j = int(j)
            if not 0 <= j < width:
                raise LpValidationError(f"variable index {j} out of range for {width} variables")
            row[j] = row.get(j, 0.0) + float(v)
        return row
    arr = np.asarray(coeffs, dtype=float)
    if arr.ndim != 1 or arr.shape[0] != width:
        raise LpValidationError(f"row has width {arr.shape} but problem has {width} variables")
    return {int(j): float(arr[j]) for j in np.flatnonzero(arr)}


class LpProblem:
    """Minimization problem ``min c.x  s.t.  rows, lower <= x <= upper``.

    Variables default to ``[0, +inf)``. ``None`` for a bound means unbounded in
    that direction.
    """

    def __init__(self, name: str = "lp"):
        self.name = name
        self.cost: list[float] = []
        self.lower: list[float] = []
        self.upper: list[float] = []
        self.var_names: list[str] = []
        self.constraints: list[Constraint] = []

    @property
    def num_vars(self) -> int:
        return len(self.cost)

    @property
    def num_rows(self) -> int:
        return len(self.constraints)

    def add_variable(self, lower: float | None = 0.0, upper: float | None = None,
                     cost: float = 0.0, name: str | None = None) -> int:
        lo = -math.inf if lower is None else float(lower)
        hi = math.inf if upper is None else float(upper)
        if lo > hi:
            raise LpValidationError(f"variable {name or self.num_vars}: lower {lo} > upper {hi}")
        self.cost.append(float(cost))
        self.lower.append(lo)
        self.upper.append(hi)
        self.var_names.append(name or f"x{self.num_vars}")
        return self.num_vars - 1

    def add_variables(self, shape, lower=0.0, upper=None, cost=0.0, name: str = "x") -> np.ndarray:
        """Add a block of variables and return their indices shaped like ``shape``."""
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        size = int(np.prod(shape))
        lo = np.broadcast_to(np.asarray(-np.inf if lower is None else lower, dtype=float), shape).ravel()
        hi = np.broadcast_to(np.asarray(np.inf if upper is None else upper, dtype=float), shape).ravel()
        cc = np.broadcast_to(np.asarray(cost, dtype=float), shape).ravel()
        start = self.num_vars
        for k, idx in enumerate(np.ndindex(*shape)):
            label = f"{name}[{','.join(map(str, idx))}]" if shape else name
            self.add_variable(lo[k], hi[k], cc[k], label)
        return np.arange(start, start + size).reshape(shape)

    def set_cost(self, index: int, value: float) -> None:
        self.cost[index] = float(value)

    def add_constraint(self, coeffs, relation: str, rhs: float, name: str | None = None) -> int:
        """Append a row. ``coeffs`` is a ``{index: coef}`` mapping or a dense vector."""
        if relation not in _RELATIONS:
            raise LpValidationError(f"unknown relation {relation!r}")
        row = _sparse_row(coeffs, self.num_vars)
        self.constraints.append(Constraint(row, relation, float(rhs), name))
        return self.num_rows - 1

    def dense(self):
        """Return ``(c, A, relations, b, lower, upper)`` as numpy arrays."""
        n = self.num_vars
        A = np.zeros((self.num_rows, n))
        for i, con in enumerate(self.constraints):
            for j, v in con.coeffs.items():
                A[i, j] = v
        rel = np.array([con.relation for con in self.constraints], dtype=object)
        b = np.array([con.rhs for con in self.constraints], dtype=float)
        return (np.array(self.cost, dtype=float), A, rel, b,
                np.array(self.lower, dtype=float), np.array(self.upper, dtype=float))

    def arrays(self):
        """Like :meth:`dense` but with ``A`` as a sparse CSC matrix."""
        rows, cols, vals = [], [], []
        for i, con in enumerate(self.constraints):
            for j, v in con.coeffs.items():
                if v != 0:
                    rows.append(i)
                    cols.append(j)
                    vals.append(v)
        A = sparse.csc_matrix((vals, (rows, cols)), shape=(self.num_rows, self.num_vars))
        rel = np.array([con.relation for con in self.constraints], dtype=object)
        b = np.array([con.rhs for con in self.constraints], dtype=float)
        return (np.array(self.cost, dtype=float), A, rel, b,
                np.array(self.lower, dtype=float), np.array(self.upper, dtype=float))

    def validate(self) -> None:
        for i, con in enumerate(self.constraints):
            for j in con.coeffs:
                if not 0 <= j < self.num_vars:
                    raise LpValidationError(f"row {i} references variable {j}")
        for j, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            if lo > hi:
                raise LpValidationError(f"variable {j}: lower {lo} > upper {hi}")

    def to_lp_text(self) -> str:
        """Plain-text LP listing, for debugging."""

        def term_list(coeffs: Iterable[tuple[int, float]]) -> str:
            parts = []
            for j, v in coeffs:
                if v == 0:
                    continue
                sign = "-" if v < 0 else "+"
                parts.append(f"{sign} {abs(v):.12g} {self.var_names[j]}")
            text = " ".join(parts) or "0"
            return text[2:] if text.startswith("+ ") else text

        lines = [f"\\ {self.name}", "Minimize", " obj: " + term_list(enumerate(self.cost)), "Subject To"]
        for i, con in enumerate(self.constraints):
            label = con.name or f"c{i}"
            lines.append(f" {label}: {term_list(sorted(con.coeffs.items()))} {con.relation} {con.rhs:.12g}")
        lines.append("Bounds")
        for name, lo, hi in zip(self.var_names, self.lower, self.upper):
            if lo == -math.inf and hi == math.inf:
                lines.append(f" {name} free")
            elif hi == math.inf:
                lines.append(f" {name} >= {lo:.12g}")
            elif lo == -math.inf:
                lines.append(f" -inf <= {name} <= {hi:.12g}")
            else:
                lines.append(f" {lo:.12g} <= {name} <= {hi:.12g}")
        lines.append("End")
        return "\n".join(lines) + "\n"


def add_abs_epigraph(problem: LpProblem, coeffs, constant: float = 0.0,
                     name: str | None = None) -> int:
    """Add ``s >= |coeffs.x + constant|`` and return the index of ``s``.

    The bound is only tight where ``s`` is pushed down by the objective or a
    constraint; the caller is responsible for that.
    """
    row = _sparse_row(coeffs, problem.num_vars)
    s = problem.add_variable(0.0, None, 0.0, name)
    upper = {j: -v for j, v in row.items()}
    upper[s] = 1.0
    lower = dict(row)
    lower[s] = 1.0
    problem.add_constraint(upper, GE, constant, None if name is None else f"{name}+")
    problem.add_constraint(lower, GE, -constant, None if name is None else f"{name}-")
    return s


# --------------------------------------------------------------------------
# bounded revised simplex


class _Basis:
    """Sparse LU of a starting basis followed by product-form eta updates."""

    def __init__(self, A: sparse.csc_matrix, basis: np.ndarray):
        self.lu = splu(A[:, basis].tocsc(), permc_spec="COLAMD")
        self.etas: list[tuple[int, np.ndarray]] = []

    def ftran(self, a: np.ndarray) -> np.ndarray:
        x = self.lu.solve(a)
        for r, col in self.etas:
            xr = x[r] / col[r]
            x -= col * xr
            x[r] = xr
        return x

    def btran(self, cb: np.ndarray) -> np.ndarray:
        z = cb.copy()
        for r, col in reversed(self.etas):
            zr = z[r]
            z[r] = 0.0
            z[r] = (zr - z @ col) / col[r]
        return self.lu.solve(z, trans="T")

    def update(self, r: int, col: np.ndarray) -> None:
        self.etas.append((r, col))


@dataclass
class _State:
    A: sparse.csc_matrix
    b: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    x: np.ndarray
    basis: np.ndarray
    is_basic: np.ndarray
    factor: _Basis | None = None
    iterations: int = 0


class _Unbounded(Exception):
    pass


class _IterationLimit(Exception):
    pass


def _refactor(st: _State) -> None:
    st.factor = _Basis(st.A, st.basis)
    nonbasic = np.flatnonzero(~st.is_basic)
    rhs = st.b - st.A[:, nonbasic] @ st.x[nonbasic]
    st.x[st.basis] = st.factor.lu.solve(rhs)


def _column(A: sparse.csc_matrix, q: int) -> np.ndarray:
    col = np.zeros(A.shape[0])
    lo, hi = A.indptr[q], A.indptr[q + 1]
    col[A.indices[lo:hi]] = A.data[lo:hi]
    return col


def _run_phase(st: _State, cost: np.ndarray, rule: str, max_iter: int,
               refactor_every: int, degenerate_switch: int) -> None:
    m = st.A.shape[0]
    AT = st.A.T.tocsr()
    degenerate_run = 0
    movable = st.hi > st.lo
    while True:
        if len(st.factor.etas) >= refactor_every:
            _refactor(st)
        y = st.factor.btran(cost[st.basis])
        d = cost - AT @ y
        x = st.x
        can_up = (~st.is_basic) & movable & (x < st.hi - TOL_PIVOT) & (d < -TOL_COST)
        can_down = (~st.is_basic) & movable & (x > st.lo + TOL_PIVOT) & (d > TOL_COST)
        eligible = np.flatnonzero(can_up | can_down)
        if eligible.size == 0:
            return
        use_bland = rule == "bland" or degenerate_run >= degenerate_switch
        if use_bland:
            q = int(eligible[0])
        else:
            q = int(eligible[np.argmax(np.abs(d[eligible]))])
        direction = 1.0 if d[q] < 0 else -1.0

        if st.iterations >= max_iter:
            raise _IterationLimit
        st.iterations += 1

        alpha = st.factor.ftran(_column(st.A, q))
        step = direction * alpha  # x_B changes by -theta * step
        xb = x[st.basis]
        lo_b = st.lo[st.basis]
        hi_b = st.hi[st.basis]
        ratios = np.full(m, np.inf)
        dec = step > TOL_PIVOT
        inc = step < -TOL_PIVOT
        ratios[dec] = np.maximum(xb[dec] - lo_b[dec], 0.0) / step[dec]
        ratios[inc] = np.maximum(hi_b[inc] - xb[inc], 0.0) / -step[inc]
        theta_basic = ratios.min() if m else np.inf
        theta_flip = st.hi[q] - st.lo[q]

        if theta_flip <= theta_basic:
            if not np.isfinite(theta_flip):
                raise _Unbounded
            x[st.basis] = xb - theta_flip * step
            x[q] = st.hi[q] if direction > 0 else st.lo[q]
            degenerate_run = 0
            continue

        tie = np.flatnonzero(ratios <= theta_basic + 1e-12 * (1.0 + theta_basic))
        # Bland tie-break: smallest variable index among blocking rows
        r = int(tie[np.argmin(st.basis[tie])])
        theta = theta_basic
        degenerate_run = degenerate_run + 1 if theta <= TOL_PIVOT else 0

        leaving = int(st.basis[r])
        x[st.basis] = xb - theta * step
        x[q] = x[q] + direction * theta
        x[leaving] = st.lo[leaving] if step[r] > 0 else st.hi[leaving]

        st.factor.update(r, alpha)
        st.basis[r] = q
        st.is_basic[q] = True
        st.is_basic[leaving] = False


def solve(problem: LpProblem, *, rule: str = "dantzig", max_iter: int = 50_000,
          refactor_every: int = 100, degenerate_switch: int = 50) -> LpSolution:
    """Solve ``problem`` with a two-phase bounded revised simplex.

    ``rule="bland"`` prices by smallest index throughout. The default
    ``"dantzig"`` prices by largest reduced cost and falls back to Bland's rule
    after ``degenerate_switch`` consecutive degenerate pivots, which keeps the
    anti-cycling guarantee. Both rules are deterministic.
    """
    if rule not in ("bland", "dantzig"):
        raise ValueError(f"unknown pricing rule {rule!r}")
    problem.validate()
    c, A, rel, b, lo, hi = problem.arrays()
    m, n = A.shape

    # slack per row: a.x + s = b
    s_lo = np.where(rel == LE, 0.0, -np.inf)
    s_hi = np.where(rel == GE, 0.0, np.inf)
    s_lo[rel == EQ] = 0.0
    s_hi[rel == EQ] = 0.0

    x0 = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
    resid = b - A @ x0
    slack_basic = (resid >= s_lo - 1e-12) & (resid <= s_hi + 1e-12)
    art_rows = np.flatnonzero(~slack_basic)
    k = art_rows.size
    signs = np.where(resid[art_rows] >= 0, 1.0, -1.0)

    full_A = sparse.hstack([
        A,
        sparse.identity(m, format="csc"),
        sparse.csc_matrix((signs, (art_rows, np.arange(k))), shape=(m, k)),
    ], format="csc")

    full_lo = np.concatenate([lo, s_lo, np.zeros(k)])
    full_hi = np.concatenate([hi, s_hi, np.full(k, np.inf)])
    x = np.concatenate([x0, np.zeros(m), np.zeros(k)])
    slack_vals = np.clip(resid, s_lo, s_hi)
    slack_vals = np.where(np.isfinite(slack_vals), slack_vals, 0.0)
    x[n:n + m] = np.where(slack_basic, resid, slack_vals)
    x[n + m:] = np.abs(resid[art_rows] - x[n + art_rows])

    basis = np.empty(m, dtype=int)
    basis[slack_basic] = n + np.flatnonzero(slack_basic)
    basis[art_rows] = n + m + np.arange(k)
    is_basic = np.zeros(n + m + k, dtype=bool)
    is_basic[basis] = True

    st = _State(full_A, b, full_lo, full_hi, x, basis, is_basic)
    if m:
        st.factor = _Basis(full_A, basis)

    phase1_obj = 0.0
    try:
        if k:
            cost1 = np.zeros(n + m + k)
            cost1[n + m:] = 1.0
            _run_phase(st, cost1, rule, max_iter, refactor_every, degenerate_switch)
            _refactor(st)
            phase1_obj = float(st.x[n + m:].sum())
            if phase1_obj > TOL_FEAS:
                return LpSolution(LpStatus.INFEASIBLE, None, math.nan, st.iterations, phase1_obj)
            st.hi[n + m:] = 0.0
            st.x[n + m:] = 0.0
        cost2 = np.concatenate([c, np.zeros(m + k)])
        if m:
            _run_phase(st, cost2, rule, max_iter, refactor_every, degenerate_switch)
            _refactor(st)
        else:
            # no rows: each variable goes to its cheaper bound
            for j in range(n):
                if c[j] < 0:
                    if not np.isfinite(hi[j]):
                        raise _Unbounded
                    st.x[j] = hi[j]
                elif c[j] > 0:
                    if not np.isfinite(lo[j]):
                        raise _Unbounded
                    st.x[j] = lo[j]
    except _Unbounded:
        return LpSolution(LpStatus.UNBOUNDED, None, -math.inf, st.iterations, phase1_obj)
    except _IterationLimit:
        return LpSolution(LpStatus.ITERATION_LIMIT, None, math.nan, st.iterations, phase1_obj)

    xs = st.x[:n].copy()
    # basic values may sit a hair outside their box after refactoring
    xs = np.clip(xs, lo, hi)
    return LpSolution(LpStatus.OPTIMAL, xs, float(c @ xs), st.iterations, phase1_obj)


def max_violation(problem: LpProblem, x: Sequence[float]) -> float:
    """Largest constraint or bound violation of ``x``."""
    c, A, rel, b, lo, hi = problem.dense()
    x = np.asarray(x, dtype=float)
    ax = A @ x if A.size else np.zeros(0)
    viol = [0.0]
    if ax.size:
        viol.append(float(np.max(np.where(rel == LE, ax - b, 0.0))))
        viol.append(float(np.max(np.where(rel == GE, b - ax, 0.0))))
        viol.append(float(np.max(np.where(rel == EQ, np.abs(ax - b), 0.0))))
    viol.append(float(np.max(lo - x, initial=0.0)))
    viol.append(float(np.max(x - hi, initial=0.0)))
    return max(viol)
