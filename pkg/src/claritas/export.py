"""JSON and CSV documents for trajectories and solutions."""
from __future__ import annotations

import csv
import io
import json

import numpy as np

from .control import ControlSolution, control_solution
from .dynamic import FREE, PaymentPlan, Trajectory
from .network import Scenario
from .robust import RobustSolution


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def trajectory_to_dict(traj: Trajectory) -> dict:
    return {
        "alpha": traj.alpha,
        "total_loss": traj.total_loss,
        "terminal_residual": traj.terminal_residual,
        "coeffs": traj.coeffs.tolist(),
        "periods": [
            {
                "t": t,
                "loss": float(traj.losses[t]),
                "residual_total": float(traj.residual[t].sum()),
                "payments_total": float(traj.payments[t].sum()),
                "inflow": traj.inflows[t].tolist(),
                "net_worth_after": traj.net_worth[t + 1].tolist(),
            }
            for t in range(traj.horizon)
        ],
        "violations": [v.message for v in traj.violations],
    }


def trajectory_to_csv(traj: Trajectory) -> str:
    N = traj.net_worth.shape[1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "loss", "residual_total", "payments_total"] + [f"w{i}" for i in range(N)])
    for t in range(traj.horizon + 1):
        loss = traj.losses[t] if t < traj.horizon else ""
        paid = traj.payments[t].sum() if t < traj.horizon else ""
        w.writerow([t, loss, traj.residual[t].sum(), paid] + traj.net_worth[t].tolist())
    return buf.getvalue()


def control_to_dict(sol: ControlSolution, scenario: Scenario) -> dict:
    traj = sol.trajectory
    mode = sol.plan.mode
    periods = []
    for t in range(traj.horizon):
        entry = {"t": t, "u": sol.injections[t].tolist()}
        if mode == FREE:
            entry["P"] = sol.plan.payments[t].tolist()
        else:
            entry["p"] = sol.plan.payments[t].tolist()
        entry.update({
            "w": traj.net_worth[t + 1].tolist(),
            "delta": float(traj.losses[t]),
            "B": float(sol.budget_used[t]),
        })
        periods.append(entry)
    return {
        "kind": "control",
        "mode": mode,
        "params": {"alpha": scenario.alpha, "eta": scenario.eta, "gamma": scenario.gamma},
        "J": sol.objective,
        "L": sol.total_loss,
        "total_injection": sol.total_injection,
        "terminal_residual": traj.terminal_residual,
        "periods": periods,
    }


def control_from_dict(doc: dict, scenario: Scenario) -> ControlSolution:
    """Rebuild a control solution from its exported document by re-simulating."""
    if doc.get("kind") != "control":
        raise ValueError("not a control solution document")
    mode = doc["mode"]
    key = "P" if mode == FREE else "p"
    plan = PaymentPlan(mode, np.array([p[key] for p in doc["periods"]], dtype=float))
    u = np.array([p["u"] for p in doc["periods"]], dtype=float)
    return control_solution(scenario, plan, u)


def control_to_csv(sol: ControlSolution) -> str:
    traj = sol.trajectory
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "injection", "B", "loss", "residual_total", "payments_total"])
    for t in range(traj.horizon):
        w.writerow([t, sol.injections[t].sum(), sol.budget_used[t], traj.losses[t],
                    traj.residual[t].sum(), traj.payments[t].sum()])
    w.writerow(["total", sol.total_injection, "", sol.total_loss, traj.terminal_residual, ""])
    return buf.getvalue()


def robust_to_dict(sol: RobustSolution) -> dict:
    pol, b = sol.policy, sol.bounds
    return {
        "kind": "robust",
        "mode": "prorata",
        "objective_mode": sol.objective_mode,
        "status": sol.status.value,
        "J_bar": b.objective_high,
        "J_nominal": b.objective_nominal,
        "nominal_effort": sol.nominal_effort,
        "worst_case_effort": sol.worst_case_effort,
        "beta": b.beta.tolist(),
        "policy": {
            "p_hat": pol.p_hat.tolist(),
            "u_hat": pol.u_hat.tolist(),
            "theta": pol.theta.tolist(),
            "gamma": pol.gamma.tolist(),
        },
        "bounds": {
            "p_low": b.payments_low.tolist(),
            "u_low": b.injections_low.tolist(),
            "w_low": b.wealth_low.tolist(),
            "B_high": b.budget_high.tolist(),
            "cumulative_high": b.cumulative_high.tolist(),
        },
    }


def robust_to_csv(sol: RobustSolution) -> str:
    b = sol.bounds
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "u_hat_total", "B_high", "min_p_low", "min_u_low", "min_w_low"])
    for t in range(sol.policy.horizon):
        w.writerow([t, sol.policy.u_hat[t].sum(), b.budget_high[t], b.payments_low[t].min(),
                    b.injections_low[t].min(), b.wealth_low[t].min()])
    return buf.getvalue()
