"""Occupation-measure linear program for the constrained average-reward MDP."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .model import N_ACTIONS, Action, State, TrafficClass, TransitionModel, reachable_states

FEASIBILITY_TOL = 1e-6
FLOW_TOL = 1e-8
_ZERO_OCCUPANCY = 1e-12

_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
}


class SolverError(RuntimeError):
    """The LP backend failed for a reason other than infeasibility."""


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """maximize c @ x  s.t.  A_eq @ x == b_eq,  A_ub @ x <= b_ub,  x >= 0.

    Variables are ordered ``3 * s + a``. The first ``n_states`` equality rows
    are flow balance, the last one is normalisation.
    """

    c: np.ndarray
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    A_ub: sp.csr_matrix | None
    b_ub: np.ndarray | None
    ub_classes: tuple[TrafficClass, ...]
    n_states: int
    # per-variable upper bounds; 0 pins states the start state cannot reach
    upper: np.ndarray | None = None

    @property
    def n_vars(self) -> int:
        return self.c.size


@dataclass(frozen=True)
class SolveReport:
    status: str  # "optimal", "infeasible" or "error"
    objective: float
    cost_lp: float
    cost_hp: float
    iterations: int
    wall_time: float
    message: str = ""

    @property
    def feasible(self) -> bool:
        return self.status == "optimal"


def flow_matrix(model: TransitionModel) -> sp.csr_matrix:
    """Rows s': sum_a x(s',a) - sum_{s,a} x(s,a) P(s'|s,a)."""
    n = model.n_states
    cols = np.arange(n * N_ACTIONS)
    out = sp.csr_matrix((np.ones(cols.size), (cols // N_ACTIONS, cols)),
                        shape=(n, n * N_ACTIONS))
    return (out - model.P.T).tocsr()


def build_lp(model: TransitionModel, limits: dict[TrafficClass, float] | None = None,
             start: State | None = State(0, 0, 0)) -> LinearProgram:
    """Assemble the LP; ``limits`` defaults to the loss limits in the model params.

    Classes whose limit is infinite get no inequality row. Occupation of
    states that cannot be reached from ``start`` is fixed at zero, otherwise
    the optimum may sit in a closed set the node never enters (with k_tx=2
    and 4-unit harvests, for instance, odd energy levels are unreachable
    from an empty battery). ``start=None`` leaves every state free.
    """
    if limits is None:
        limits = {cls: model.params.loss_limit(cls) for cls in TrafficClass}
    n = model.n_states
    nv = n * N_ACTIONS
    A_eq = sp.vstack([flow_matrix(model), sp.csr_matrix(np.ones((1, nv)))]).tocsr()
    b_eq = np.zeros(n + 1)
    b_eq[-1] = 1.0

    classes = tuple(cls for cls in TrafficClass
                    if cls in limits and math.isfinite(limits[cls]))
    if classes:
        A_ub = sp.csr_matrix(np.vstack([model.cost(cls).ravel() for cls in classes]))
        b_ub = np.array([limits[cls] for cls in classes], dtype=float)
    else:
        A_ub = b_ub = None
    upper = None
    if start is not None:
        upper = np.repeat(np.where(reachable_states(model, start), np.inf, 0.0), N_ACTIONS)
    return LinearProgram(model.reward.ravel().copy(), A_eq, b_eq, A_ub, b_ub, classes, n, upper)


def solve_lp(lp: LinearProgram, model: TransitionModel | None = None) -> tuple[np.ndarray | None, SolveReport]:
    """Solve with HiGHS. Returns the occupation measure, shaped (n_states, 3).

    Infeasibility is reported through ``SolveReport.status`` and a ``None``
    measure. Any other backend failure raises SolverError.
    """
    t0 = time.perf_counter()
    bounds = (0, None) if lp.upper is None else \
        np.column_stack([np.zeros(lp.n_vars), lp.upper])
    res = linprog(-lp.c, A_ub=lp.A_ub, b_ub=lp.b_ub, A_eq=lp.A_eq, b_eq=lp.b_eq,
                  bounds=bounds, method="highs", options=_HIGHS_OPTIONS)
    wall = time.perf_counter() - t0
    iters = int(getattr(res, "nit", 0) or 0)
    if res.status == 2:
        return None, SolveReport("infeasible", math.nan, math.nan, math.nan, iters, wall,
                                 str(res.message))
    if res.status != 0:
        raise SolverError(f"LP solve failed (status {res.status}): {res.message}")

    x = np.clip(res.x, 0.0, None).reshape(lp.n_states, N_ACTIONS)
    if model is not None:
        cost_lp = float(np.sum(x * model.cost_lp))
        cost_hp = float(np.sum(x * model.cost_hp))
    else:
        cost_lp = cost_hp = math.nan
        if lp.A_ub is not None:
            vals = lp.A_ub @ x.ravel()
            for cls, v in zip(lp.ub_classes, vals):
                if cls is TrafficClass.LP:
                    cost_lp = float(v)
                else:
                    cost_hp = float(v)
    return x, SolveReport("optimal", float(lp.c @ x.ravel()), cost_lp, cost_hp, iters, wall,
                          str(res.message))


def flow_residual(model: TransitionModel, x: np.ndarray) -> float:
    """Infinity norm of the flow-balance residual of an occupation measure."""
    return float(np.max(np.abs(flow_matrix(model) @ np.asarray(x).ravel())))


def extract_policy(x: np.ndarray, model: TransitionModel | None = None) -> np.ndarray:
    """Per-state action distribution from an occupation measure.

    Visited states get x(s, a) / sum_a x(s, a). Without ``model``, states with
    (numerically) zero occupancy harvest deterministically. With ``model``
    they get the first action, in canonical order, that reaches a state
    already steered towards the visited set in as few steps as possible;
    a plain harvest fallback can otherwise park the chain in a closed class
    the LP never saw, e.g. a full battery with both queues full.
    """
    x = np.asarray(x, dtype=float)
    total = x.sum(axis=1)
    policy = np.zeros_like(x)
    visited = total > _ZERO_OCCUPANCY
    policy[visited] = x[visited] / total[visited, None]
    if model is None:
        policy[~visited, Action.HARVEST] = 1.0
        return policy

    assigned = visited.copy()
    P = model.P
    while not assigned.all():
        # positive probability of entering the assigned set, per (state, action)
        hits = (P @ assigned.astype(float)).reshape(-1, N_ACTIONS) > 0.0
        frontier = ~assigned & hits.any(axis=1)
        if not frontier.any():
            # unreachable from the visited set under every action
            policy[~assigned, Action.HARVEST] = 1.0
            break
        for s in np.flatnonzero(frontier):
            policy[s, int(np.argmax(hits[s]))] = 1.0
        assigned |= frontier
    return policy


@dataclass(frozen=True, eq=False)
class Solution:
    x: np.ndarray | None
    policy: np.ndarray | None
    report: SolveReport


def solve(model: TransitionModel, limits: dict[TrafficClass, float] | None = None,
          start: State | None = State(0, 0, 0)) -> Solution:
    """build_lp + solve_lp + extract_policy."""
    lp = build_lp(model, limits, start)
    x, report = solve_lp(lp, model)
    if x is None:
        return Solution(None, None, report)
    return Solution(x, extract_policy(x, model), report)
