"""Independent reference computations used by the tests.

Written directly from the slot semantics, without the package's transition
code: enumerate every joint outcome of one slot and apply it.
"""

import itertools

import numpy as np


def brute_force_row(params, state, action):
    e, q_lp, q_hp = state
    feasible_lp = action == 1 and q_lp > 0 and e >= params.k_tx
    feasible_hp = action == 2 and q_hp > 0 and e >= params.k_tx
    harvest = params.harvest_dist if action == 0 else ((0, 1.0),)
    success = ((True, params.mu), (False, 1.0 - params.mu)) \
        if (feasible_lp or feasible_hp) else ((False, 1.0),)
    out = {}
    for (w, pw), (ok, ps), (n_lp, pl), (n_hp, ph) in itertools.product(
            harvest, success, enumerate(params.arrival_lp), enumerate(params.arrival_hp)):
        prob = pw * ps * pl * ph
        if prob == 0.0:
            continue
        ne = e
        nl, nh = q_lp, q_hp
        if action == 0:
            ne = min(e + w, params.e_max)
        elif feasible_lp or feasible_hp:
            ne = e - params.k_tx
            if ok and feasible_lp:
                nl -= 1
            if ok and feasible_hp:
                nh -= 1
        nl = min(nl + n_lp, params.q_lp_max)
        nh = min(nh + n_hp, params.q_hp_max)
        key = (ne, nl, nh)
        out[key] = out.get(key, 0.0) + prob
    return out


def all_states(params):
    return [(e, a, b) for e in range(params.e_max + 1)
            for a in range(params.q_lp_max + 1) for b in range(params.q_hp_max + 1)]


def dense_chain(params, policy):
    """Induced transition matrix assembled from brute_force_row."""
    states = all_states(params)
    index = {s: i for i, s in enumerate(states)}
    P = np.zeros((len(states), len(states)))
    for i, s in enumerate(states):
        for a in range(3):
            if policy[i, a] == 0.0:
                continue
            for t, p in brute_force_row(params, s, a).items():
                P[i, index[t]] += policy[i, a] * p
    return P


def stationary_by_eig(P):
    """Left Perron eigenvector, for chains with a single recurrent class."""
    vals, vecs = np.linalg.eig(P.T)
    k = int(np.argmin(np.abs(vals - 1.0)))
    v = np.real(vecs[:, k])
    return v / v.sum()


def policy_gain(params, policy, reward):
    """Long-run average reward of a policy with a single recurrent class."""
    d = stationary_by_eig(dense_chain(params, policy))
    return float(d @ (policy * reward).sum(axis=1))
