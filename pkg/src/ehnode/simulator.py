"""Seeded slot-by-slot Monte-Carlo simulation of the node under a stationary policy.

Each slot consumes four uniforms from a PCG64 generator, always in the same
order: action choice, harvest amount or transmit outcome, LP arrivals,
HP arrivals. A run is therefore fully determined by (params, policy, seed).
"""

from __future__ import annotations

import bisect
import math
from collections import deque
from dataclasses import dataclass, field
from itertools import accumulate

import numpy as np

from .evaluation import Metrics, validate_policy
from .model import Action, ModelParams, State, TrafficClass, build_state_space, loss_cost

GENERATOR = "numpy.random.PCG64"
DEFAULT_WARMUP = 10_000
DEFAULT_BATCHES = 100
_CHUNK = 65_536

TRACE_COLUMNS = ("slot", "e", "q_lp", "q_hp", "action", "tx_success",
                 "arr_lp", "arr_hp", "drop_lp", "drop_hp")


@dataclass(frozen=True)
class SimConfig:
    slots: int
    seed: int
    warmup_slots: int = DEFAULT_WARMUP
    batches: int = DEFAULT_BATCHES
    start: State = State(0, 0, 0)

    def __post_init__(self) -> None:
        if self.slots < 1:
            raise ValueError("slots must be >= 1")
        if not 0 <= self.warmup_slots < self.slots:
            raise ValueError("warmup_slots must satisfy 0 <= warmup_slots < slots")
        if self.batches < 2:
            raise ValueError("at least two batches are needed for standard errors")


@dataclass(frozen=True, eq=False)
class SimTrace:
    """Per-slot record (arrays indexed by slot) plus the estimated metrics.

    ``e``, ``q_lp``, ``q_hp`` hold the state at the start of the slot.
    ``stderr`` has the same keys as ``metrics.as_dict()``.
    """

    config: SimConfig
    e: np.ndarray
    q_lp: np.ndarray
    q_hp: np.ndarray
    action: np.ndarray
    tx_success: np.ndarray
    arr_lp: np.ndarray
    arr_hp: np.ndarray
    drop_lp: np.ndarray
    drop_hp: np.ndarray
    metrics: Metrics
    stderr: dict[str, float]
    counts: dict[str, int] = field(default_factory=dict)
    generator: str = GENERATOR

    def column(self, name: str) -> np.ndarray:
        if name == "slot":
            return np.arange(self.config.slots)
        return getattr(self, name)


def _cdf(probs) -> list[float]:
    c = list(accumulate(probs))
    c[-1] = math.inf  # guards against round-off in the last bucket
    return c


def _mean_se(values: np.ndarray, batches: int) -> tuple[float, float]:
    """Mean and batch-means standard error."""
    n = values.size
    mean = float(values.mean())
    size = n // batches
    if size == 0:
        return mean, math.nan
    b = values[: size * batches].reshape(batches, size).mean(axis=1)
    return mean, float(b.std(ddof=1) / math.sqrt(batches))


def _ratio_se(num: np.ndarray, den: np.ndarray) -> tuple[float, float]:
    """Ratio of sums and its delta-method standard error over batches."""
    total = den.sum()
    if total <= 0:
        return math.nan, math.nan
    r = float(num.sum() / total)
    resid = num - r * den
    k = num.size
    se = float(math.sqrt(resid.var(ddof=1) / k) / den.mean()) if k > 1 else math.nan
    return r, se


def simulate(params: ModelParams, policy: np.ndarray, cfg: SimConfig) -> SimTrace:
    space = build_state_space(params)
    policy = validate_policy(policy, len(space))
    pol_cdf = [_cdf(row) for row in policy.tolist()]
    harvest_w = [w for w, _ in params.harvest_dist]
    harvest_cdf = _cdf([p for _, p in params.harvest_dist])
    lp_cdf = _cdf(params.arrival_lp)
    hp_cdf = _cdf(params.arrival_hp)
    e_max, cap_lp, cap_hp = params.e_max, params.q_lp_max, params.q_hp_max
    k_tx, mu = params.k_tx, params.mu
    n_lp1, n_hp1 = cap_lp + 1, cap_hp + 1
    bisect_right = bisect.bisect_right

    T = cfg.slots
    rec_e = np.empty(T, dtype=np.int32)
    rec_qlp = np.empty(T, dtype=np.int32)
    rec_qhp = np.empty(T, dtype=np.int32)
    rec_act = np.empty(T, dtype=np.int8)
    rec_tx = np.empty(T, dtype=np.int8)
    rec_alp = np.empty(T, dtype=np.int32)
    rec_ahp = np.empty(T, dtype=np.int32)
    rec_dlp = np.empty(T, dtype=np.int32)
    rec_dhp = np.empty(T, dtype=np.int32)

    # admission slots of queued packets, FIFO per class
    fifo_lp: deque[int] = deque()
    fifo_hp: deque[int] = deque()
    # (admission slot, sojourn) of every packet that left after the warmup
    delays_lp: list[tuple[int, int]] = []
    delays_hp: list[tuple[int, int]] = []

    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    e, q_lp, q_hp = cfg.start
    if State(e, q_lp, q_hp) not in space:
        raise IndexError(f"start state {tuple(cfg.start)} outside the state space")
    # packets already queued at the start count as admitted at slot 0
    fifo_lp.extend([0] * q_lp)
    fifo_hp.extend([0] * q_hp)
    warm = cfg.warmup_slots

    t = 0
    while t < T:
        block = rng.random((min(_CHUNK, T - t), 4)).tolist()
        for u_act, u_out, u_lp, u_hp in block:
            rec_e[t] = e
            rec_qlp[t] = q_lp
            rec_qhp[t] = q_hp
            a = bisect_right(pol_cdf[(e * n_lp1 + q_lp) * n_hp1 + q_hp], u_act)
            rec_act[t] = a
            ok = 0
            if a == 0:
                e = min(e + harvest_w[bisect_right(harvest_cdf, u_out)], e_max)
            elif e >= k_tx and (q_lp if a == 1 else q_hp) > 0:
                e -= k_tx
                if u_out < mu:
                    ok = 1
                    if a == 1:
                        q_lp -= 1
                        adm = fifo_lp.popleft()
                        if adm >= warm:
                            delays_lp.append((adm, t - adm))
                    else:
                        q_hp -= 1
                        adm = fifo_hp.popleft()
                        if adm >= warm:
                            delays_hp.append((adm, t - adm))
            rec_tx[t] = ok

            n = bisect_right(lp_cdf, u_lp)
            keep = min(n, cap_lp - q_lp)
            q_lp += keep
            fifo_lp.extend([t] * keep)
            rec_alp[t] = n
            rec_dlp[t] = n - keep

            n = bisect_right(hp_cdf, u_hp)
            keep = min(n, cap_hp - q_hp)
            q_hp += keep
            fifo_hp.extend([t] * keep)
            rec_ahp[t] = n
            rec_dhp[t] = n - keep
            t += 1

    metrics, stderr, counts = _estimate(params, cfg, rec_e, rec_qlp, rec_qhp, rec_act, rec_tx,
                                        rec_alp, rec_ahp, rec_dlp, rec_dhp, delays_lp, delays_hp)
    return SimTrace(cfg, rec_e, rec_qlp, rec_qhp, rec_act, rec_tx, rec_alp, rec_ahp,
                    rec_dlp, rec_dhp, metrics, stderr, counts)


def _estimate(params, cfg, e, q_lp, q_hp, act, tx, arr_lp, arr_hp, drop_lp, drop_hp,
              delays_lp, delays_hp):
    w = cfg.warmup_slots
    B = cfg.batches
    n = cfg.slots - w
    size = n // B
    used = size * B
    est: dict[str, float] = {}
    se: dict[str, float] = {}
    counts: dict[str, int] = {}

    def per_batch(values: np.ndarray) -> np.ndarray:
        return values[w:w + used].reshape(B, size).sum(axis=1).astype(float)

    for cls, queue, arrivals, drops, delays, a in (
            (TrafficClass.LP, q_lp, arr_lp, drop_lp, delays_lp, Action.TX_LP),
            (TrafficClass.HP, q_hp, arr_hp, drop_hp, delays_hp, Action.TX_HP)):
        tag = cls.value
        success = (tx[w:] == 1) & (act[w:] == a)
        est[f"throughput_{tag}"], se[f"throughput_{tag}"] = _mean_se(success.astype(float), B)

        table = np.array([loss_cost(params, q, cls) for q in range(params.capacity(cls) + 1)])
        est[f"loss_{tag}"], se[f"loss_{tag}"] = _mean_se(table[queue[w:]], B)

        est[f"drop_{tag}"], se[f"drop_{tag}"] = _ratio_se(per_batch(drops), per_batch(arrivals))

        if delays:
            d = np.asarray(delays, dtype=float)
            batch = np.minimum(((d[:, 0] - w) // size).astype(int), B - 1) if size else \
                np.zeros(len(d), dtype=int)
            num = np.bincount(batch, weights=d[:, 1], minlength=B)
            den = np.bincount(batch, minlength=B).astype(float)
            est[f"delay_{tag}"], se[f"delay_{tag}"] = _ratio_se(num, den)
        else:
            est[f"delay_{tag}"] = se[f"delay_{tag}"] = math.nan

        arrived = int(arrivals[w:].sum())
        dropped = int(drops[w:].sum())
        counts[f"arrived_{tag}"] = arrived
        counts[f"dropped_{tag}"] = dropped
        counts[f"admitted_{tag}"] = arrived - dropped
        counts[f"delivered_{tag}"] = int(success.sum())

    obj = params.weight_lp * tx[w:] * (act[w:] == Action.TX_LP) \
        + params.weight_hp * tx[w:] * (act[w:] == Action.TX_HP)
    est["objective"], se["objective"] = _mean_se(obj.astype(float), B)
    return Metrics(**est), se, counts
