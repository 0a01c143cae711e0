"""Liability networks, scenarios and the scenario file format.

Every network carries one extra node, the external sink, at the last index.
It collects payments owed to the outside sector and owes nothing itself.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import jsonschema
import numpy as np

TOL_FEAS = 1e-7


class NetworkValidationError(ValueError):
    def __init__(self, violations: Sequence["Violation"]):
        self.violations = list(violations)
        super().__init__("; ".join(v.message for v in self.violations))


class ScenarioFileError(ValueError):
    """Unreadable or schema-violating scenario document."""


@dataclass(frozen=True)
class Violation:
    code: str
    index: tuple
    message: str


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FinancialNetwork:
    """Nominal liabilities between ``n`` banks plus the external sink.

    ``liabilities[i, j]`` is what node ``i`` owes node ``j``; the matrix is
    ``(n+1) x (n+1)`` with the sink at index ``n``.
    """

    liabilities: np.ndarray
    names: tuple[str, ...] = ()

    def __post_init__(self):
        P = np.asarray(self.liabilities, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 1:
            raise ValueError(f"liability matrix must be square, got shape {P.shape}")
        object.__setattr__(self, "liabilities", _frozen(P))
        names = tuple(self.names) or tuple(f"bank{i + 1}" for i in range(P.shape[0] - 1))
        if len(names) != P.shape[0] - 1:
            raise ValueError(f"{len(names)} names for {P.shape[0] - 1} banks")
        object.__setattr__(self, "names", names)

    @classmethod
    def from_banks(cls, interbank, external, names: Sequence[str] = ()) -> "FinancialNetwork":
        """Build from an ``n x n`` interbank matrix and per-bank external liabilities."""
        L = np.asarray(interbank, dtype=float)
        ext = np.asarray(external, dtype=float)
        n = L.shape[0]
        if L.shape != (n, n) or ext.shape != (n,):
            raise ValueError(f"shapes {L.shape} and {ext.shape} do not describe {n} banks")
        P = np.zeros((n + 1, n + 1))
        P[:n, :n] = L
        P[:n, n] = ext
        return cls(P, tuple(names))

    @property
    def n(self) -> int:
        return self.liabilities.shape[0] - 1

    @property
    def size(self) -> int:
        """Node count including the sink."""
        return self.liabilities.shape[0]

    @property
    def nominal_outflows(self) -> np.ndarray:
        return self.liabilities.sum(axis=1)

    @property
    def nominal_inflows(self) -> np.ndarray:
        return self.liabilities.sum(axis=0)

    def scaled(self, factor: float) -> "FinancialNetwork":
        return FinancialNetwork(self.liabilities * factor, self.names)


def validate(network: FinancialNetwork) -> list[Violation]:
    """Collect every violated network invariant; empty list means valid."""
    P = network.liabilities
    n = network.n
    out: list[Violation] = []
    label = list(network.names) + ["external"]
    if not np.all(np.isfinite(P)):
        for i, j in zip(*np.nonzero(~np.isfinite(P))):
            out.append(Violation("non_finite", (int(i), int(j)), f"liability[{i},{j}] is not finite"))
    for i, j in zip(*np.nonzero(P < 0)):
        out.append(Violation("negative", (int(i), int(j)),
                             f"liability[{i},{j}] ({label[i]} -> {label[j]}) = {P[i, j]:g} is negative"))
    for i in np.flatnonzero(np.diag(P) != 0):
        if i < n:
            out.append(Violation("diagonal", (int(i), int(i)),
                                 f"liability[{i},{i}] = {P[i, i]:g}: a bank cannot owe itself"))
    for j in np.flatnonzero(P[n] != 0):
        out.append(Violation("sink_row", (n, int(j)),
                             f"liability[{n},{j}] = {P[n, j]:g}: the external sink owes nothing"))
    return out


def _require_valid(network: FinancialNetwork) -> None:
    report = validate(network)
    if report:
        raise NetworkValidationError(report)


def pro_rata_matrix(network: FinancialNetwork) -> np.ndarray:
    """Row-stochastic relative liability matrix.

    Row ``i`` holds the share of bank ``i``'s total obligation owed to each
    creditor; a node owing nothing gets a unit diagonal entry instead.
    """
    _require_valid(network)
    P = network.liabilities
    pbar = P.sum(axis=1)
    A = np.zeros_like(P)
    owes = pbar > 0
    A[owes] = P[owes] / pbar[owes, None]
    idle = np.flatnonzero(~owes)
    A[idle, idle] = 1.0
    A.setflags(write=False)
    return A


def admissible(network: FinancialNetwork, inflow, tol: float = TOL_FEAS) -> bool:
    """True when every node stays solvent paying its liabilities in full."""
    c = np.asarray(inflow, dtype=float)
    P = network.liabilities
    if c.shape != (network.size,):
        raise ValueError(f"inflow must have length {network.size}, got {c.shape}")
    w = c + P.sum(axis=0) - P.sum(axis=1)
    return bool(np.all(w >= -tol))


@dataclass(frozen=True, eq=False)
class Scenario:
    """A network together with a horizon of inflows, budgets and parameters.

    ``inflows`` has shape ``(T, n+1)`` with zero sink entries. When
    ``uncertainty`` is given, ``inflows`` are the nominal predictions and
    ``uncertainty[t]`` the relative error level of period ``t``.
    """

    network: FinancialNetwork
    inflows: np.ndarray
    budget: np.ndarray
    alpha: float = 1.0
    eta: float = 0.0
    gamma: float = 0.0
    uncertainty: np.ndarray | None = None
    description: str = ""

    def __post_init__(self):
        e = np.atleast_2d(np.asarray(self.inflows, dtype=float))
        object.__setattr__(self, "inflows", _frozen(e))
        object.__setattr__(self, "budget", _frozen(np.atleast_1d(np.asarray(self.budget, dtype=float))))
        if self.uncertainty is not None:
            object.__setattr__(self, "uncertainty",
                               _frozen(np.atleast_1d(np.asarray(self.uncertainty, dtype=float))))

    @property
    def horizon(self) -> int:
        return self.inflows.shape[0]

    def replace(self, **changes) -> "Scenario":
        fields = dict(network=self.network, inflows=self.inflows, budget=self.budget,
                      alpha=self.alpha, eta=self.eta, gamma=self.gamma,
                      uncertainty=self.uncertainty, description=self.description)
        fields.update(changes)
        return Scenario(**fields)


def validate_scenario(scenario: Scenario) -> list[Violation]:
    out = validate(scenario.network)
    T = scenario.horizon
    size = scenario.network.size
    e = scenario.inflows
    if e.shape[1] != size:
        out.append(Violation("shape", ("inflows",), f"inflows have {e.shape[1]} columns, expected {size}"))
    else:
        for t, i in zip(*np.nonzero(e < 0)):
            out.append(Violation("negative_inflow", (int(t), int(i)), f"inflow[{t}][{i}] = {e[t, i]:g} is negative"))
        if np.any(e[:, -1] != 0):
            out.append(Violation("sink_inflow", ("inflows",), "the external sink receives no external inflow"))
    F = scenario.budget
    if F.shape != (T,):
        out.append(Violation("shape", ("budget",), f"budget has length {F.shape[0]}, expected {T}"))
    else:
        for t in np.flatnonzero(F < 0):
            out.append(Violation("negative_budget", (int(t),), f"budget[{t}] = {F[t]:g} is negative"))
        for t in np.flatnonzero(np.diff(F) < 0):
            out.append(Violation("budget_decreasing", (int(t) + 1,),
                                 f"budget decreases from {F[t]:g} to {F[t + 1]:g} at period {t + 1}"))
    if not scenario.alpha >= 1:
        out.append(Violation("alpha", (), f"alpha = {scenario.alpha:g} must be >= 1"))
    if not 0 <= scenario.eta <= 1:
        out.append(Violation("eta", (), f"eta = {scenario.eta:g} must lie in [0, 1]"))
    if not scenario.gamma >= 0:
        out.append(Violation("gamma", (), f"gamma = {scenario.gamma:g} must be >= 0"))
    eps = scenario.uncertainty
    if eps is not None:
        if eps.shape != (T,):
            out.append(Violation("shape", ("uncertainty",), f"uncertainty has length {eps.shape[0]}, expected {T}"))
        else:
            for t in np.flatnonzero((eps < 0) | (eps >= 1)):
                out.append(Violation("uncertainty", (int(t),), f"uncertainty[{t}] = {eps[t]:g} must lie in [0, 1)"))
    return out


# --------------------------------------------------------------------------
# scenario files

SCENARIO_SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["banks", "liabilities", "external_liabilities", "inflows", "budget", "params"],
    "properties": {
        "description": {"type": "string"},
        "banks": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "liabilities": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "external_liabilities": {"type": "array", "items": {"type": "number"}},
        "inflows": {"type": "array", "minItems": 1, "items": {"type": "array", "items": {"type": "number"}}},
        "budget": {"type": "array", "items": {"type": "number"}},
        "params": {
            "type": "object",
            "additionalProperties": False,
            "required": ["alpha", "eta", "gamma"],
            "properties": {
                "alpha": {"type": "number"},
                "eta": {"type": "number"},
                "gamma": {"type": "number"},
            },
        },
        "uncertainty": {"type": "array", "items": {"type": "number"}},
    },
}


def scenario_from_dict(doc: dict) -> Scenario:
    try:
        jsonschema.validate(doc, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioFileError(f"field {where}: {exc.message}") from None
    names = doc["banks"]
    n = len(names)
    L = np.asarray(doc["liabilities"], dtype=float)
    ext = np.asarray(doc["external_liabilities"], dtype=float)
    if L.shape != (n, n):
        raise ScenarioFileError(f"field liabilities: expected {n}x{n} array for {n} banks, got shape {L.shape}")
    if ext.shape != (n,):
        raise ScenarioFileError(f"field external_liabilities: expected {n} entries, got {ext.shape}")
    rows = doc["inflows"]
    for t, row in enumerate(rows):
        if len(row) != n:
            raise ScenarioFileError(f"field inflows/{t}: expected {n} entries, got {len(row)}")
    e = np.zeros((len(rows), n + 1))
    e[:, :n] = np.asarray(rows, dtype=float)
    params = doc["params"]
    return Scenario(
        network=FinancialNetwork.from_banks(L, ext, names),
        inflows=e,
        budget=np.asarray(doc["budget"], dtype=float),
        alpha=float(params["alpha"]),
        eta=float(params["eta"]),
        gamma=float(params["gamma"]),
        uncertainty=None if "uncertainty" not in doc else np.asarray(doc["uncertainty"], dtype=float),
        description=doc.get("description", ""),
    )


def scenario_to_dict(scenario: Scenario) -> dict:
    net = scenario.network
    n = net.n
    doc: dict[str, Any] = {}
    if scenario.description:
        doc["description"] = scenario.description
    doc.update({
        "banks": list(net.names),
        "liabilities": net.liabilities[:n, :n].tolist(),
        "external_liabilities": net.liabilities[:n, n].tolist(),
        "inflows": scenario.inflows[:, :n].tolist(),
        "budget": scenario.budget.tolist(),
        "params": {"alpha": scenario.alpha, "eta": scenario.eta, "gamma": scenario.gamma},
    })
    if scenario.uncertainty is not None:
        doc["uncertainty"] = scenario.uncertainty.tolist()
    return doc


def load_scenario(path) -> Scenario:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioFileError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return scenario_from_dict(doc)


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=2) + "\n")


def bundled_path(name: str) -> Path:
    """Path of a scenario file shipped with the package."""
    return Path(__file__).parent / "data" / name


def load_bundled(name: str) -> Scenario:
    return load_scenario(bundled_path(name))
