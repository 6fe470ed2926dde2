"""Convergence studies along the ``mu``, ``eps``, ``dt`` and ``h`` axes.

For the regularization axes (``mu``, ``eps``) the levels share mesh and time
grid, and consecutive levels are compared in a discrete
``L^2(0,T; H^1)``-type norm; Cauchy behaviour shows as strictly decreasing
differences.  For the discretization axes (``dt``, ``h``) the scenario must
carry an exact solution; final-time ``L^2`` errors and observed orders are
reported.
"""

from __future__ import annotations

import csv
import math
import time as _time
from dataclasses import dataclass, field

import numpy as np

from .stepper import Scenario, Simulator

AXES = ("mu", "eps", "dt", "h")


@dataclass
class StudyResult:
    axis: str
    levels: list
    metrics: list = field(default_factory=list)  # one dict per level
    differences: list = field(default_factory=list)  # one dict per consecutive pair
    orders: dict = field(default_factory=dict)  # field -> list of observed orders
    errors: list = field(default_factory=list)  # per-level errors (dt/h axes)
    failures: dict = field(default_factory=dict)  # level index -> message

    def decreasing(self, key: str = "total") -> bool:
        d = [row[key] for row in self.differences]
        return len(d) >= 2 and all(b < a for a, b in zip(d, d[1:]))

    def rows(self):
        """Flat rows for CSV output: one per level (raw metrics) plus pair/order data."""
        out = []
        for i, lev in enumerate(self.levels):
            row = {"kind": "level", "index": i, "level": lev}
            if i < len(self.metrics):
                row.update(self.metrics[i])
            if i < len(self.errors):
                row.update({f"err_{k}": v for k, v in self.errors[i].items()})
            if i in self.failures:
                row["failure"] = self.failures[i]
            out.append(row)
        for i, d in enumerate(self.differences):
            row = {"kind": "difference", "index": i, "level": f"{self.levels[i]}|{self.levels[i + 1]}"}
            row.update({f"diff_{k}": v for k, v in d.items()})
            out.append(row)
        for name, vals in self.orders.items():
            for i, v in enumerate(vals):
                out.append({"kind": "order", "index": i, "level": f"{self.levels[i]}|{self.levels[i + 1]}",
                            "field": name, "order": v})
        return out

    def write_csv(self, path) -> None:
        rows = self.rows()
        keys = []
        for r in rows:
            for k in r:
                if k not in keys:
                    keys.append(k)
        with open(path, "w", newline="") as fh:
            wr = csv.DictWriter(fh, fieldnames=keys)
            wr.writeheader()
            for r in rows:
                wr.writerow(r)


def _level_scenario(base: Scenario, axis: str, value) -> Scenario:
    if axis == "mu":
        return base.with_solver(mu=float(value))
    if axis == "eps":
        return base.with_solver(eps=float(value))
    if axis == "dt":
        return base.with_solver(dt=float(value))
    if axis == "h":
        return base.with_(nx=int(value), ny=int(value))
    raise ValueError(f"unknown study axis {axis!r}")


def check_levels(axis: str, levels) -> None:
    if axis not in AXES:
        raise ValueError(f"unknown study axis {axis!r}; choose from {', '.join(AXES)}")
    if len(levels) < 3:
        raise ValueError("a study needs at least 3 levels")
    lv = [float(v) for v in levels]
    if any(v <= 0 for v in lv):
        raise ValueError("study levels must be positive")
    if axis == "h":
        ok = all(b > a for a, b in zip(lv, lv[1:]))
        what = "increasing (cells per side)"
    else:
        ok = all(b < a for a, b in zip(lv, lv[1:]))
        what = "decreasing"
    if not ok:
        raise ValueError(f"levels along axis {axis!r} must be strictly {what}")


def _summary(sim, states, reports, elapsed) -> dict:
    last = states[-1]
    out = {
        "time": last.time,
        "steps": last.step,
        "runtime_s": elapsed,
        "theta_mean": float(np.dot(sim.mats.M_lump_bulk, last.theta) / sim.mats.M_lump_bulk.sum()),
        "chi_mean": float(np.dot(sim.mats.M_lump_c, last.chi) / sim.mats.M_lump_c.sum()),
    }
    if reports:
        out.update({
            "lyapunov_final": reports[-1].lyapunov,
            "max_abs_lyapunov_residual": max(abs(r.lyapunov_residual) for r in reports),
            "min_positivity_slack": min(min(r.positivity_slack, r.positivity_slack_s) for r in reports),
            "max_penetration": max(r.max_penetration for r in reports),
            "max_box_violation": max(r.box_violation for r in reports),
            "fp_iters_total": sum(r.fp_iters for r in reports),
        })
    return out


def _sq(M, v):
    return float(v @ (M @ v))


def trajectory_difference(sim, states_a, states_b) -> dict:
    """Discrete ``L^2(0,T; H^1)`` differences (``L^2(0,T;L^2)`` for ``chi`` too)."""
    if len(states_a) != len(states_b):
        raise ValueError("trajectories must share the time grid")
    G = sim.MS
    Gc = sim.MSc
    acc = {"theta": 0.0, "theta_s": 0.0, "u": 0.0, "chi": 0.0}
    for n in range(1, len(states_a)):
        a, b = states_a[n], states_b[n]
        dt = a.time - states_a[n - 1].time
        du = a.u - b.u
        acc["theta"] += dt * _sq(G, a.theta - b.theta)
        acc["theta_s"] += dt * _sq(Gc, a.theta_s - b.theta_s)
        acc["u"] += dt * (_sq(G, du[:, 0]) + _sq(G, du[:, 1]))
        acc["chi"] += dt * _sq(Gc, a.chi - b.chi)
    out = {k: math.sqrt(v) for k, v in acc.items()}
    out["total"] = math.sqrt(sum(acc.values()))
    return out


def final_errors(sim, state) -> dict:
    """Final-time ``L^2`` errors against the scenario's exact solution."""
    ex = sim.scenario.exact
    t = state.time
    M, Mc = sim.mats.M_bulk, sim.mats.M_c
    e = state.theta - ex.theta(sim.xv, sim.yv, t)
    es = state.theta_s - ex.theta_s(sim.xc, sim.yc, t)
    eu = state.u - ex.u(sim.xv, sim.yv, t)
    ec = state.chi - ex.chi(sim.xc, sim.yc, t)
    return {
        "theta": math.sqrt(_sq(M, e)),
        "theta_s": math.sqrt(_sq(Mc, es)),
        "u": math.sqrt(_sq(M, eu[:, 0]) + _sq(M, eu[:, 1])),
        "chi": math.sqrt(_sq(Mc, ec)),
    }


def observed_orders(errors: list, sizes: list) -> dict:
    """``log(e_i / e_{i+1}) / log(s_i / s_{i+1})`` per field (``s`` = h or dt)."""
    out = {}
    for k in errors[0]:
        vals = []
        for i in range(len(errors) - 1):
            a, b = errors[i][k], errors[i + 1][k]
            vals.append(math.log(a / b) / math.log(sizes[i] / sizes[i + 1]) if a > 0 and b > 0 else float("nan"))
        out[k] = vals
    return out


def run_study(base: Scenario, axis: str, levels, reports: bool = True, log=None) -> StudyResult:
    """Run ``base`` at every level; partial results survive a failing level.

    A failing level is recorded in ``failures``; differences/orders are
    then computed only over the leading run of successful levels.
    """
    check_levels(axis, levels)
    if axis in ("dt", "h") and base.exact is None:
        raise ValueError(f"axis {axis!r} needs a scenario with an exact solution")
    res = StudyResult(axis, list(levels))
    prev_states = None
    prev_sim = None
    for i, lev in enumerate(levels):
        sc = _level_scenario(base, axis, lev)
        t0 = _time.perf_counter()
        try:
            sim = Simulator(sc)
            keep = axis in ("mu", "eps")
            states, reps = sim.run(keep_states=keep, reports=reports)
        except Exception as exc:  # recorded, remaining levels still attempted
            res.failures[i] = f"{type(exc).__name__}: {exc}"
            res.metrics.append({})
            prev_states = None
            if log:
                log(f"level {lev}: FAILED ({exc})")
            continue
        elapsed = _time.perf_counter() - t0
        res.metrics.append(_summary(sim, states, reps, elapsed))
        if axis in ("mu", "eps"):
            if prev_states is not None and not res.failures:
                res.differences.append(trajectory_difference(sim, prev_states, states))
            prev_states, prev_sim = states, sim
        else:
            res.errors.append(final_errors(sim, states[-1]))
        if log:
            log(f"level {lev}: done in {elapsed:.2f}s")
    if axis in ("dt", "h") and len(res.errors) == len(levels):
        sizes = [float(v) for v in levels] if axis == "dt" else [1.0 / float(v) for v in levels]
        res.orders = observed_orders(res.errors, sizes)
    return res
