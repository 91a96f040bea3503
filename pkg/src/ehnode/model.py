"""Node parameters, state space and the exact transition/reward/cost model.

One slot proceeds as: action effect (harvest or transmit attempt), then
independent LP and HP arrivals, then clipping of the queues at capacity.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Iterator, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

PROB_TOL = 1e-12


class ParamsError(ValueError):
    """Raised when a ModelParams instance violates its invariants."""


class Action(enum.IntEnum):
    HARVEST = 0
    TX_LP = 1
    TX_HP = 2


ACTIONS = tuple(Action)
N_ACTIONS = len(ACTIONS)


class TrafficClass(enum.Enum):
    LP = "lp"
    HP = "hp"


class State(NamedTuple):
    e: int
    q_lp: int
    q_hp: int


def _check_distribution(name: str, probs: Sequence[float]) -> None:
    if len(probs) == 0:
        raise ParamsError(f"{name}: empty distribution")
    for p in probs:
        if not (0.0 <= p <= 1.0) or math.isnan(p):
            raise ParamsError(f"{name}: probability {p!r} outside [0, 1]")
    total = math.fsum(probs)
    if abs(total - 1.0) > PROB_TOL:
        raise ParamsError(f"{name}: probabilities sum to {total!r}, not 1")


def mean_arrivals(dist: Sequence[float]) -> float:
    return math.fsum(a * p for a, p in enumerate(dist))


@dataclass(frozen=True)
class ModelParams:
    """All parameters of the single-node model.

    Energy is counted in integer units. ``arrival_lp[a]`` is the probability
    that ``a`` LP packets arrive in a slot (likewise for HP). A loss limit of
    ``math.inf`` means the class has no loss requirement.
    """

    e_max: int
    q_lp_max: int
    q_hp_max: int
    k_tx: int
    mu: float
    harvest_dist: tuple[tuple[int, float], ...]
    arrival_lp: tuple[float, ...]
    arrival_hp: tuple[float, ...]
    weight_lp: float = 1.0
    weight_hp: float = 1.0
    loss_limit_lp: float = math.inf
    loss_limit_hp: float = math.inf

    def __post_init__(self) -> None:
        # normalise list inputs so equal params compare and hash equal
        object.__setattr__(
            self, "harvest_dist",
            tuple((int(w), float(p)) for w, p in self.harvest_dist))
        object.__setattr__(self, "arrival_lp", tuple(float(p) for p in self.arrival_lp))
        object.__setattr__(self, "arrival_hp", tuple(float(p) for p in self.arrival_hp))
        self._validate()

    def _validate(self) -> None:
        for name in ("e_max", "q_lp_max", "q_hp_max", "k_tx"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise ParamsError(f"{name} must be an integer >= 1, got {v!r}")
        if self.k_tx > self.e_max:
            raise ParamsError(
                f"k_tx={self.k_tx} exceeds e_max={self.e_max}; no transmission is ever feasible")
        if not 0.0 <= self.mu <= 1.0:
            raise ParamsError(f"mu must lie in [0, 1], got {self.mu!r}")
        ws = [w for w, _ in self.harvest_dist]
        if any(w < 0 for w in ws):
            raise ParamsError("harvest_dist: energy amounts must be >= 0")
        if len(set(ws)) != len(ws):
            raise ParamsError("harvest_dist: energy amounts must be distinct")
        _check_distribution("harvest_dist", [p for _, p in self.harvest_dist])
        _check_distribution("arrival_lp", self.arrival_lp)
        _check_distribution("arrival_hp", self.arrival_hp)
        for name in ("weight_lp", "weight_hp"):
            v = getattr(self, name)
            if not (v >= 0.0 and math.isfinite(v)):
                raise ParamsError(f"{name} must be a finite nonnegative real, got {v!r}")
        for cls, limit, dist in (("lp", self.loss_limit_lp, self.arrival_lp),
                                 ("hp", self.loss_limit_hp, self.arrival_hp)):
            if math.isnan(limit) or limit < 0.0 or (math.isfinite(limit) and limit > 1.0):
                raise ParamsError(f"loss_limit_{cls} must be in [0, 1] or unbounded, got {limit!r}")
            if math.isfinite(limit) and mean_arrivals(dist) <= 0.0:
                raise ParamsError(
                    f"loss_limit_{cls} is finite but the mean {cls.upper()} arrival rate is zero")

    def capacity(self, cls: TrafficClass) -> int:
        return self.q_lp_max if cls is TrafficClass.LP else self.q_hp_max

    def arrivals(self, cls: TrafficClass) -> tuple[float, ...]:
        return self.arrival_lp if cls is TrafficClass.LP else self.arrival_hp

    def loss_limit(self, cls: TrafficClass) -> float:
        return self.loss_limit_lp if cls is TrafficClass.LP else self.loss_limit_hp

    def weight(self, cls: TrafficClass) -> float:
        return self.weight_lp if cls is TrafficClass.LP else self.weight_hp


@dataclass(frozen=True)
class StateSpace:
    """Row-major enumeration: energy major, LP queue middle, HP queue minor."""

    e_max: int
    q_lp_max: int
    q_hp_max: int

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.e_max + 1, self.q_lp_max + 1, self.q_hp_max + 1)

    def __len__(self) -> int:
        a, b, c = self.shape
        return a * b * c

    def __iter__(self) -> Iterator[State]:
        for e in range(self.e_max + 1):
            for q_lp in range(self.q_lp_max + 1):
                for q_hp in range(self.q_hp_max + 1):
                    yield State(e, q_lp, q_hp)

    def __contains__(self, s: object) -> bool:
        try:
            e, q_lp, q_hp = s  # type: ignore[misc]
        except (TypeError, ValueError):
            return False
        return 0 <= e <= self.e_max and 0 <= q_lp <= self.q_lp_max and 0 <= q_hp <= self.q_hp_max

    def index(self, s: State) -> int:
        if s not in self:
            raise IndexError(f"state {tuple(s)} outside the state space {self.shape}")
        e, q_lp, q_hp = s
        return (e * (self.q_lp_max + 1) + q_lp) * (self.q_hp_max + 1) + q_hp

    def state(self, i: int) -> State:
        if not 0 <= i < len(self):
            raise IndexError(f"index {i} outside [0, {len(self)})")
        rest, q_hp = divmod(i, self.q_hp_max + 1)
        e, q_lp = divmod(rest, self.q_lp_max + 1)
        return State(e, q_lp, q_hp)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-index energy, LP queue and HP queue components."""
        e, q_lp, q_hp = np.indices(self.shape)
        return e.ravel(), q_lp.ravel(), q_hp.ravel()


def build_state_space(params: ModelParams) -> StateSpace:
    return StateSpace(params.e_max, params.q_lp_max, params.q_hp_max)


def can_transmit(params: ModelParams, s: State, a: Action) -> bool:
    a = Action(a)
    if a is Action.TX_LP:
        return s.q_lp > 0 and s.e >= params.k_tx
    if a is Action.TX_HP:
        return s.q_hp > 0 and s.e >= params.k_tx
    return False


def _check_state(params: ModelParams, s: State) -> None:
    if s not in build_state_space(params):
        raise IndexError(f"state {tuple(s)} outside bounds "
                         f"(e_max={params.e_max}, q_lp_max={params.q_lp_max}, "
                         f"q_hp_max={params.q_hp_max})")


def action_effect(params: ModelParams, s: State, a: Action) -> list[tuple[State, float]]:
    """Post-action, pre-arrival distribution of one slot."""
    a = Action(a)
    if a is Action.HARVEST:
        out: dict[State, float] = {}
        for w, p in params.harvest_dist:
            if p == 0.0:
                continue
            nxt = State(min(s.e + w, params.e_max), s.q_lp, s.q_hp)
            out[nxt] = out.get(nxt, 0.0) + p
        return list(out.items())
    if not can_transmit(params, s, a):
        return [(s, 1.0)]
    e = s.e - params.k_tx
    if a is Action.TX_LP:
        sent = State(e, s.q_lp - 1, s.q_hp)
    else:
        sent = State(e, s.q_lp, s.q_hp - 1)
    kept = State(e, s.q_lp, s.q_hp)
    return [(o, p) for o, p in ((sent, params.mu), (kept, 1.0 - params.mu)) if p > 0.0]


def transition(params: ModelParams, s: State, a: Action) -> dict[State, float]:
    """Next-state distribution of state ``s`` under action ``a``."""
    s = State(*s)
    _check_state(params, s)
    out: dict[State, float] = {}
    for mid, p_mid in action_effect(params, s, a):
        for n_lp, p_lp in enumerate(params.arrival_lp):
            if p_lp == 0.0:
                continue
            q_lp = min(mid.q_lp + n_lp, params.q_lp_max)
            for n_hp, p_hp in enumerate(params.arrival_hp):
                if p_hp == 0.0:
                    continue
                nxt = State(mid.e, q_lp, min(mid.q_hp + n_hp, params.q_hp_max))
                out[nxt] = out.get(nxt, 0.0) + p_mid * p_lp * p_hp
    # summation round-off can push a merged entry one ulp above 1, and
    # products of tiny probabilities can underflow to 0
    return {t: min(prob, 1.0) for t, prob in out.items() if prob > 0.0}


def reward(params: ModelParams, s: State, a: Action) -> float:
    s = State(*s)
    _check_state(params, s)
    a = Action(a)
    if not can_transmit(params, s, a):
        return 0.0
    w = params.weight_lp if a is Action.TX_LP else params.weight_hp
    return w * params.mu


def loss_cost(params: ModelParams, q: int, cls: TrafficClass) -> float:
    """Immediate loss probability of a class whose queue holds ``q`` packets.

    Probability mass of arrival counts that cannot fit in the free space,
    divided by the class's mean arrival rate.
    """
    cls = TrafficClass(cls)
    cap = params.capacity(cls)
    if not 0 <= q <= cap:
        raise IndexError(f"queue length {q} outside [0, {cap}]")
    dist = params.arrivals(cls)
    mean = mean_arrivals(dist)
    if mean <= 0.0:
        # no arrivals means nothing can be lost
        return 0.0
    return math.fsum(dist[cap - q + 1:]) / mean


def expected_overflow(dist: Sequence[float], q: int, cap: int) -> float:
    """Expected number of arriving packets discarded at queue length ``q``."""
    free = cap - q
    return math.fsum((n - free) * p for n, p in enumerate(dist) if n > free)


@dataclass(frozen=True, eq=False)
class TransitionModel:
    """Sparse constrained-MDP model in canonical (state, action) order.

    ``P`` has one row per pair, row ``3 * s + a``. The per-pair arrays all
    have shape ``(n_states, 3)``.
    """

    params: ModelParams
    space: StateSpace
    P: sp.csr_matrix
    reward: np.ndarray
    cost_lp: np.ndarray
    cost_hp: np.ndarray
    # success probability of the transmit (mu or 0) per class
    tx_lp: np.ndarray
    tx_hp: np.ndarray
    # expected packets discarded on arrival per slot
    drops_lp: np.ndarray
    drops_hp: np.ndarray

    @property
    def n_states(self) -> int:
        return len(self.space)

    def row(self, s: State | int, a: Action) -> list[tuple[State, float]]:
        i = s if isinstance(s, (int, np.integer)) else self.space.index(State(*s))
        r = 3 * int(i) + int(a)
        lo, hi = self.P.indptr[r], self.P.indptr[r + 1]
        return [(self.space.state(int(j)), float(p))
                for j, p in zip(self.P.indices[lo:hi], self.P.data[lo:hi])]

    def cost(self, cls: TrafficClass) -> np.ndarray:
        return self.cost_lp if TrafficClass(cls) is TrafficClass.LP else self.cost_hp

    def with_weights(self, weight_lp: float, weight_hp: float) -> "TransitionModel":
        """Same dynamics with a different reward scalarisation."""
        reward = weight_lp * self.tx_lp + weight_hp * self.tx_hp
        params = replace(self.params, weight_lp=weight_lp, weight_hp=weight_hp)
        return TransitionModel(params, self.space, self.P, reward, self.cost_lp,
                               self.cost_hp, self.tx_lp, self.tx_hp,
                               self.drops_lp, self.drops_hp)


def build_model(params: ModelParams) -> TransitionModel:
    space = build_state_space(params)
    n = len(space)
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    reward_ = np.zeros((n, N_ACTIONS))
    cost_lp = np.zeros((n, N_ACTIONS))
    cost_hp = np.zeros((n, N_ACTIONS))
    tx_lp = np.zeros((n, N_ACTIONS))
    tx_hp = np.zeros((n, N_ACTIONS))
    drops_lp = np.zeros((n, N_ACTIONS))
    drops_hp = np.zeros((n, N_ACTIONS))

    lp_cost_by_q = [loss_cost(params, q, TrafficClass.LP) for q in range(params.q_lp_max + 1)]
    hp_cost_by_q = [loss_cost(params, q, TrafficClass.HP) for q in range(params.q_hp_max + 1)]

    for i, s in enumerate(space):
        for a in ACTIONS:
            dist = transition(params, s, a)
            row = sorted((space.index(t), p) for t, p in dist.items())
            indices.extend(j for j, _ in row)
            data.extend(p for _, p in row)
            indptr.append(len(indices))

            reward_[i, a] = reward(params, s, a)
            if can_transmit(params, s, a):
                (tx_lp if a is Action.TX_LP else tx_hp)[i, a] = params.mu
            cost_lp[i, a] = lp_cost_by_q[s.q_lp]
            cost_hp[i, a] = hp_cost_by_q[s.q_hp]
            for mid, p_mid in action_effect(params, s, a):
                drops_lp[i, a] += p_mid * expected_overflow(
                    params.arrival_lp, mid.q_lp, params.q_lp_max)
                drops_hp[i, a] += p_mid * expected_overflow(
                    params.arrival_hp, mid.q_hp, params.q_hp_max)

    P = sp.csr_matrix((np.asarray(data), np.asarray(indices, dtype=np.int64),
                       np.asarray(indptr, dtype=np.int64)), shape=(n * N_ACTIONS, n))
    return TransitionModel(params, space, P, reward_, cost_lp, cost_hp,
                           tx_lp, tx_hp, drops_lp, drops_hp)


def reachable_states(model: TransitionModel, start: State = State(0, 0, 0)) -> np.ndarray:
    """Mask of states reachable from ``start`` under some sequence of actions."""
    n = model.n_states
    cols = np.arange(n * N_ACTIONS)
    collapse = sp.csr_matrix((np.ones(cols.size), (cols // N_ACTIONS, cols)),
                             shape=(n, n * N_ACTIONS))
    graph = (collapse @ model.P).tocsr()
    order = csgraph.breadth_first_order(graph, model.space.index(State(*start)),
                                        directed=True, return_predecessors=False)
    mask = np.zeros(n, dtype=bool)
    mask[order] = True
    return mask
