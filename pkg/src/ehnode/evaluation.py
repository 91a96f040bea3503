"""Exact long-run evaluation of stationary policies, plus relative value iteration."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

from .model import N_ACTIONS, Action, State, TrafficClass, TransitionModel, mean_arrivals

DIRECT_SOLVE_MAX_STATES = 2000
STATIONARY_TOL = 1e-10


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class Metrics:
    """Long-run per-slot performance of a policy.

    ``loss_*`` is the time average of the immediate loss probability charged
    at the pre-transition queue length; ``drop_*`` is the fraction of arriving
    packets discarded on overflow. Delays are in slots and NaN when no packet
    of the class is ever admitted.
    """

    throughput_lp: float
    throughput_hp: float
    loss_lp: float
    loss_hp: float
    drop_lp: float
    drop_hp: float
    delay_lp: float
    delay_hp: float
    objective: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def validate_policy(policy: np.ndarray, n_states: int) -> np.ndarray:
    policy = np.asarray(policy, dtype=float)
    if policy.shape != (n_states, N_ACTIONS):
        raise ValueError(f"policy shape {policy.shape} != ({n_states}, {N_ACTIONS})")
    if np.any(policy < 0.0) or np.any(policy > 1.0):
        raise ValueError("policy entries must lie in [0, 1]")
    bad = np.abs(policy.sum(axis=1) - 1.0) > 1e-9
    if np.any(bad):
        raise ValueError(f"policy rows do not sum to 1 at state indices {np.flatnonzero(bad)[:5]}")
    return policy


def induced_chain(model: TransitionModel, policy: np.ndarray) -> sp.csr_matrix:
    """Transition matrix of the Markov chain obtained by fixing ``policy``."""
    policy = validate_policy(policy, model.n_states)
    n = model.n_states
    weighted = sp.diags(policy.ravel()) @ model.P
    cols = np.arange(n * N_ACTIONS)
    collapse = sp.csr_matrix((np.ones(cols.size), (cols // N_ACTIONS, cols)),
                             shape=(n, n * N_ACTIONS))
    out = (collapse @ weighted).tocsr()
    out.eliminate_zeros()
    return out


def _solve_irreducible(P: np.ndarray) -> np.ndarray:
    """Stationary vector of an irreducible stochastic matrix by direct solve."""
    n = P.shape[0]
    if n == 1:
        return np.ones(1)
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    d = np.linalg.solve(A, b)
    d = np.clip(d, 0.0, None)
    return d / d.sum()


def _closed_classes(P: sp.csr_matrix, start: int) -> tuple[list[np.ndarray], np.ndarray]:
    """Recurrent classes reachable from ``start`` and the reachable set."""
    reach = csgraph.breadth_first_order(P, start, directed=True, return_predecessors=False)
    reachable = np.zeros(P.shape[0], dtype=bool)
    reachable[reach] = True
    _, labels = csgraph.connected_components(P, directed=True, connection="strong")
    coo = P.tocoo()
    leaves = labels[coo.row] != labels[coo.col]
    leaky = np.unique(labels[coo.row[leaves]])
    classes = []
    for lab in np.unique(labels[reachable]):
        if lab not in leaky:
            classes.append(np.flatnonzero(labels == lab))
    return classes, reachable


def _absorption(P: sp.csr_matrix, start: int, classes: list[np.ndarray],
                reachable: np.ndarray) -> np.ndarray:
    """Probability of ending in each closed class when started at ``start``."""
    if len(classes) == 1:
        return np.ones(1)
    in_class = np.full(P.shape[0], -1)
    for k, members in enumerate(classes):
        in_class[members] = k
    if in_class[start] >= 0:
        out = np.zeros(len(classes))
        out[in_class[start]] = 1.0
        return out
    transient = np.flatnonzero(reachable & (in_class < 0))
    Q = P[transient][:, transient]
    R = np.column_stack([np.asarray(P[transient][:, members].sum(axis=1)).ravel()
                         for members in classes])
    B = sp.linalg.spsolve((sp.eye(len(transient)) - Q).tocsc(), R)
    B = np.atleast_2d(B)
    if B.shape[0] != len(transient):
        B = B.T
    return B[int(np.searchsorted(transient, start))]


def power_iteration(P: sp.csr_matrix, start_dist: np.ndarray, tol: float = STATIONARY_TOL,
                    max_iter: int = 1_000_000) -> np.ndarray:
    """Limit of ``start_dist`` under the lazy chain (I + P) / 2.

    The lazy chain has the same stationary distributions as P and is
    aperiodic, so the iteration converges for any finite chain.
    """
    PT = P.T.tocsr()
    d = np.asarray(start_dist, dtype=float)
    residual = math.inf
    for _ in range(max_iter):
        nxt = 0.5 * (d + PT @ d)
        residual = float(np.abs(nxt - d).sum())
        d = nxt
        if residual < tol * 1e-2:
            break
    else:
        raise ConvergenceError("power iteration did not converge", residual)
    d = np.clip(d, 0.0, None)
    return d / d.sum()


def stationary_distribution(model: TransitionModel, policy: np.ndarray,
                            start: State = State(0, 0, 0), method: str = "auto") -> np.ndarray:
    """Long-run state distribution of the chain started in ``start``.

    ``method`` is "direct" (linear solve per recurrent class), "power" or
    "auto" (direct up to DIRECT_SOLVE_MAX_STATES states).
    """
    P = induced_chain(model, policy)
    i0 = model.space.index(State(*start))
    n = model.n_states
    if method == "auto":
        method = "direct" if n <= DIRECT_SOLVE_MAX_STATES else "power"
    if method == "power":
        start_dist = np.zeros(n)
        start_dist[i0] = 1.0
        d = power_iteration(P, start_dist)
    elif method == "direct":
        classes, reachable = _closed_classes(P, i0)
        weights = _absorption(P, i0, classes, reachable)
        d = np.zeros(n)
        for members, w in zip(classes, weights):
            if w <= 0.0:
                continue
            sub = P[members][:, members]
            part = (_solve_irreducible(sub.toarray()) if members.size <= DIRECT_SOLVE_MAX_STATES
                    else power_iteration(sub, np.full(members.size, 1.0 / members.size)))
            d[members] += w * part
        d /= d.sum()
    else:
        raise ValueError(f"unknown method {method!r}")

    residual = float(np.abs(P.T @ d - d).max())
    if residual > STATIONARY_TOL:
        raise ConvergenceError("stationary distribution is not invariant", residual)
    return d


def evaluate_policy(model: TransitionModel, policy: np.ndarray,
                    dist: np.ndarray | None = None) -> Metrics:
    policy = validate_policy(policy, model.n_states)
    if dist is None:
        dist = stationary_distribution(model, policy)
    pair = dist[:, None] * policy  # long-run frequency of each (state, action)
    params = model.params
    _, q_lp, q_hp = model.space.arrays()

    out = {}
    for cls, queue in ((TrafficClass.LP, q_lp), (TrafficClass.HP, q_hp)):
        tag = cls.value
        tx = model.tx_lp if cls is TrafficClass.LP else model.tx_hp
        drops = model.drops_lp if cls is TrafficClass.LP else model.drops_hp
        rate = mean_arrivals(params.arrivals(cls))
        out[f"throughput_{tag}"] = float(np.sum(pair * tx))
        out[f"loss_{tag}"] = float(np.sum(pair * model.cost(cls)))
        dropped = float(np.sum(pair * drops))
        out[f"drop_{tag}"] = dropped / rate if rate > 0.0 else 0.0
        admitted = rate - dropped
        backlog = float(dist @ queue)
        # Little's law; backlog is measured at slot start, before the action
        out[f"delay_{tag}"] = backlog / admitted if admitted > 1e-15 else math.nan
    out["objective"] = (params.weight_lp * out["throughput_lp"]
                        + params.weight_hp * out["throughput_hp"])
    return Metrics(**out)


def static_policy(n_states: int) -> np.ndarray:
    """Equal probability on the three actions in every state."""
    return np.full((n_states, N_ACTIONS), 1.0 / N_ACTIONS)


def constant_policy(n_states: int, action: Action) -> np.ndarray:
    policy = np.zeros((n_states, N_ACTIONS))
    policy[:, int(action)] = 1.0
    return policy


def relative_value_iteration(model: TransitionModel, weights: tuple[float, float] | None = None,
                             tol: float = 1e-9, max_iter: int = 1_000_000,
                             aperiodicity: float = 0.5) -> float:
    """Optimal unconstrained average reward (gain) per slot.

    Iterates on the transformed chain aperiodicity * P + (1 - aperiodicity) * I,
    which has the same gain, and stops when the span of successive value
    differences drops below ``tol``.
    """
    if weights is None:
        r = model.reward
    else:
        r = weights[0] * model.tx_lp + weights[1] * model.tx_hp
    n = model.n_states
    P = model.P
    tau = aperiodicity
    h = np.zeros(n)
    span = math.inf
    for _ in range(max_iter):
        q = r + (tau * (P @ h)).reshape(n, N_ACTIONS) + (1.0 - tau) * h[:, None]
        v = q.max(axis=1)
        diff = v - h
        span = float(diff.max() - diff.min())
        if span < tol:
            return float(0.5 * (diff.max() + diff.min()))
        h = v - v[0]
    raise ConvergenceError("relative value iteration hit the iteration cap", span)
