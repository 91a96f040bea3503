"""Solve/evaluate orchestration for single runs and parameter sweeps."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .evaluation import Metrics, evaluate_policy, static_policy
from .model import ModelParams, TransitionModel, build_model
from .solver import Solution, flow_residual, solve


@dataclass(frozen=True, eq=False)
class SolveResult:
    model: TransitionModel
    solution: Solution
    flow_residual: float
    metrics: Metrics | None

    @property
    def feasible(self) -> bool:
        return self.solution.report.feasible


def solve_params(params: ModelParams, evaluate: bool = True) -> SolveResult:
    model = build_model(params)
    sol = solve(model)
    if not sol.report.feasible:
        return SolveResult(model, sol, math.nan, None)
    metrics = evaluate_policy(model, sol.policy) if evaluate else None
    return SolveResult(model, sol, flow_residual(model, sol.x), metrics)


def _nan_metrics() -> Metrics:
    return Metrics(*([math.nan] * 9))


def weight_point(params: ModelParams, w_hp: float) -> dict[str, object]:
    res = solve_params(replace(params, weight_lp=1.0 - w_hp, weight_hp=w_hp))
    m = res.metrics if res.feasible else _nan_metrics()
    return {"w_hp": w_hp, "thr_lp": m.throughput_lp, "thr_hp": m.throughput_hp,
            "delay_lp": m.delay_lp, "delay_hp": m.delay_hp, "loss_lp": m.loss_lp,
            "loss_hp": m.loss_hp, "objective": m.objective,
            "status": res.solution.report.status}


def with_arrival_rate(params: ModelParams, rate: float) -> ModelParams:
    """Bernoulli arrivals with probability ``rate`` for both classes.

    With rate 0 nothing can be lost, so finite loss limits are dropped
    (the loss formula is undefined for a zero mean arrival rate).
    """
    changes: dict[str, object] = {"arrival_lp": (1.0 - rate, rate),
                                  "arrival_hp": (1.0 - rate, rate)}
    if rate == 0.0:
        changes.update(loss_limit_lp=math.inf, loss_limit_hp=math.inf)
    return replace(params, **changes)


def arrival_point(params: ModelParams, rate: float) -> dict[str, object]:
    p = with_arrival_rate(params, rate)
    res = solve_params(p)
    opt = res.metrics if res.feasible else _nan_metrics()
    static = evaluate_policy(res.model, static_policy(res.model.n_states))
    return {"rate": rate, "status": res.solution.report.status,
            "opt_loss_lp": opt.loss_lp, "opt_loss_hp": opt.loss_hp,
            "static_loss_lp": static.loss_lp, "static_loss_hp": static.loss_hp,
            "opt_drop_lp": opt.drop_lp, "opt_drop_hp": opt.drop_hp,
            "static_drop_lp": static.drop_lp, "static_drop_hp": static.drop_hp}


def _run(fn: Callable, params: ModelParams, points: Iterable[float], jobs: int) -> list[dict]:
    points = list(points)
    if jobs <= 1 or len(points) <= 1:
        return [fn(params, x) for x in points]
    with ProcessPoolExecutor(max_workers=min(jobs, len(points))) as pool:
        # map keeps the input order, so the output does not depend on scheduling
        return list(pool.map(fn, [params] * len(points), points))


def sweep_weight(params: ModelParams, weights: Sequence[float], jobs: int = 1) -> list[dict]:
    return _run(weight_point, params, weights, jobs)


def sweep_arrival(params: ModelParams, rates: Sequence[float], jobs: int = 1) -> list[dict]:
    return _run(arrival_point, params, rates, jobs)


def policy_slice(model: TransitionModel, policy: np.ndarray, energy: int) -> np.ndarray:
    """Policy at one energy level, shaped (q_lp + 1, q_hp + 1, 3)."""
    sp = model.space
    idx = [sp.index((energy, a, b)) for a in range(sp.q_lp_max + 1) for b in range(sp.q_hp_max + 1)]
    return policy[idx].reshape(sp.q_lp_max + 1, sp.q_hp_max + 1, -1)
