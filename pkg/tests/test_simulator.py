import numpy as np
import pytest
from scipy.stats import chisquare

from conftest import tiny_params
from ehnode.evaluation import constant_policy, static_policy
from ehnode.model import Action, State, build_model
from ehnode.simulator import TRACE_COLUMNS, SimConfig, simulate


def test_same_seed_same_trace(tiny):
    pol = static_policy(12)
    cfg = SimConfig(slots=20_000, seed=11, warmup_slots=1_000)
    a, b = simulate(tiny, pol, cfg), simulate(tiny, pol, cfg)
    for col in TRACE_COLUMNS:
        assert np.array_equal(a.column(col), b.column(col))
    assert a.metrics == b.metrics
    c = simulate(tiny, pol, SimConfig(slots=20_000, seed=12, warmup_slots=1_000))
    assert not np.array_equal(a.action, c.action)


def test_harvest_only_without_arrivals():
    p = tiny_params(arrival_lp=(1.0,), arrival_hp=(1.0,))
    tr = simulate(p, constant_policy(12, Action.HARVEST), SimConfig(slots=500, seed=1, warmup_slots=100))
    assert tr.e[-1] == p.e_max
    first = int(np.argmax(tr.e == p.e_max))
    assert np.all(tr.e[first:] == p.e_max)
    assert tr.metrics.throughput_lp == tr.metrics.throughput_hp == 0.0


@pytest.mark.parametrize("seed", [0, 1])
def test_state_bounds_and_counts(paper_params, seed):
    n = paper_params.e_max
    pol = np.random.default_rng(seed).dirichlet(np.ones(3), size=1275)
    tr = simulate(paper_params, pol, SimConfig(slots=50_000, seed=seed, warmup_slots=5_000))
    assert tr.e.min() >= 0 and tr.e.max() <= n
    assert tr.q_lp.min() >= 0 and tr.q_lp.max() <= paper_params.q_lp_max
    assert tr.q_hp.min() >= 0 and tr.q_hp.max() <= paper_params.q_hp_max
    for c in ("lp", "hp"):
        assert tr.counts[f"admitted_{c}"] == tr.counts[f"arrived_{c}"] - tr.counts[f"dropped_{c}"]
    # queue bookkeeping: next length = length - success + admitted
    dq = tr.q_lp[1:] - tr.q_lp[:-1]
    sent = (tr.tx_success == 1) & (tr.action == Action.TX_LP)
    np.testing.assert_array_equal(dq, (tr.arr_lp - tr.drop_lp - sent)[:-1])


def test_trace_replays_model_semantics(tiny, tiny_model):
    pol = static_policy(12)
    tr = simulate(tiny, pol, SimConfig(slots=30_000, seed=5, warmup_slots=0))
    space = tiny_model.space
    for t in range(tr.config.slots - 1):
        s = State(int(tr.e[t]), int(tr.q_lp[t]), int(tr.q_hp[t]))
        nxt = State(int(tr.e[t + 1]), int(tr.q_lp[t + 1]), int(tr.q_hp[t + 1]))
        row = dict(tiny_model.row(space.index(s), Action(int(tr.action[t]))))
        assert row.get(nxt, 0.0) > 0.0


def test_transition_frequencies_chi_square(tiny, tiny_model):
    space = tiny_model.space
    # transmit HP whenever possible, otherwise harvest: concentrates visits
    pol = constant_policy(12, Action.HARVEST)
    for s in space:
        if s.e >= 1 and s.q_hp == 1:
            pol[space.index(s)] = [0.0, 0.0, 1.0]
    tr = simulate(tiny, pol, SimConfig(slots=400_000, seed=9, warmup_slots=0))
    idx = (tr.e * 2 + tr.q_lp) * 2 + tr.q_hp
    pair = idx * 3 + tr.action
    checked = 0
    for r in np.unique(pair[:-1]):
        where = np.flatnonzero(pair[:-1] == r)
        if where.size < 100_000:
            continue
        s, a = divmod(int(r), 3)
        row = tiny_model.row(s, Action(a))
        targets = [space.index(t) for t, _ in row]
        obs = np.array([(idx[where + 1] == j).sum() for j in targets])
        exp = np.array([p for _, p in row]) * where.size
        assert obs.sum() == where.size
        assert chisquare(obs, exp).pvalue > 0.001
        checked += 1
    assert checked >= 1


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(slots=10, seed=0, warmup_slots=10)
    with pytest.raises(ValueError):
        SimConfig(slots=0, seed=0, warmup_slots=0)
