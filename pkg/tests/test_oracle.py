from __future__ import annotations

import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netsac import oracle
from netsac.envs import line_env
from netsac.graph import Graph
from netsac.mdp import LocalSpace, tabular_mdp
from netsac.policy import LocalizedPolicyTable
from netsac.sac import NeighborhoodLayout

from .conftest import random_policy


def _brute_force_value(mdp, policy, horizon=400):
    """J by pushing the (s, a) distribution forward step by step."""
    chain = oracle.build_chain(mdp, policy)
    r = chain.rewards.mean(axis=0)
    dist = (oracle.global_init(mdp)[:, None] * chain.pi).ravel(order="F")
    total, disc = 0.0, 1.0
    for _ in range(horizon):
        total += disc * dist @ r
        dist = dist @ chain.P
        disc *= mdp.gamma
    return total


def _single(reward, gamma=0.7, n_states=1, kernel=None):
    kernel = np.ones((n_states, 1)) if kernel is None else kernel
    return tabular_mdp("one", Graph(1), [LocalSpace(n_states, 1)], gamma, [kernel], [np.asarray(reward, float)], [np.eye(n_states)[0]])


# ---------------------------------------------------------------------------
# chain


def test_chain_trivial():
    mdp = _single([0.5])
    chain = oracle.build_chain(mdp, mdp.uniform_policy())
    assert chain.P.tolist() == [[1.0]]


def test_chain_deterministic_is_zero_one():
    # two agents whose next state is their neighbor's action
    g = Graph(2, [(0, 1)])
    spaces = [LocalSpace(2, 2)] * 2
    kernels = []
    for i in range(2):
        K = np.zeros((16, 2))
        for row in range(16):
            a_other = (row >> (3 - i)) & 1  # digits: s_0, s_1, a_0, a_1
            K[row, a_other] = 1.0
        kernels.append(K)
    mdp = tabular_mdp("swap", g, spaces, 0.7, kernels, [np.zeros(16)] * 2, [np.array([1.0, 0.0])] * 2)
    pol = LocalizedPolicyTable.from_probs([np.array([[0.0, 1.0], [1.0, 0.0]])] * 2)
    P = oracle.build_chain(mdp, pol).P
    assert set(np.unique(P)) <= {0.0, 1.0}
    assert (np.count_nonzero(P, axis=1) == 1).all()


def test_chain_rows_sum_to_one(line2):
    P = oracle.build_chain(line2, random_policy(line2, 0)).P
    assert np.abs(P.sum(axis=1) - 1).max() <= 1e-10


def test_chain_is_product_of_locals(line2):
    pol = random_policy(line2, 1)
    chain = oracle.build_chain(line2, pol)
    s, a = oracle.all_configurations(line2)
    for z in [0, 5, 11]:
        for z2 in [1, 6, 15]:
            p = 1.0
            for i in range(2):
                nb = list(line2.neighbors(i))
                p *= line2.local_probs(i, s[z][nb][None], a[z][nb][None])[0][s[z2][i]]
                p *= pol.action_probs(i, s[z2][i])[a[z2][i]]
            assert chain.P[z, z2] == pytest.approx(p, abs=1e-15)


def test_chain_size_guard(monkeypatch, line4):
    monkeypatch.setattr(oracle, "MAX_CHAIN_ENTRIES", 100)
    with pytest.raises(oracle.ChainTooLarge):
        oracle.build_chain(line4, line4.uniform_policy())


# ---------------------------------------------------------------------------
# exact Q


@pytest.mark.parametrize("reward, expected", [(0.0, 0.0), (1.0, 1 / 0.3)])
def test_constant_reward_q(reward, expected):
    mdp = line_env(3, 0.7)
    chain = oracle.build_chain(mdp, random_policy(mdp, 2))
    rewards = np.full_like(chain.rewards, reward)
    chain = oracle.GlobalChain(mdp, chain.policy, chain.kernel, chain.pi, chain.P, rewards, chain.codec)
    for i in range(3):
        assert np.allclose(oracle.exact_q(chain, i).q, expected, atol=1e-10)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_value_iteration_agrees_with_solve(line2, seed):
    chain = oracle.build_chain(line2, random_policy(line2, seed))
    for i in range(2):
        a = oracle.exact_q(chain, i, "solve").q
        b = oracle.exact_q(chain, i, "value_iteration").q
        assert np.abs(a - b).max() <= 1e-8
        assert oracle.bellman_residual(chain, a, i) <= 1e-8


def test_value_iteration_cap():
    assert oracle.value_iteration_cap(0.7, 1.0) == int(np.ceil(np.log(1e-10 * 0.3) / np.log(0.7)))


def test_global_q_is_mean_of_agents(line4):
    chain = oracle.build_chain(line4, random_policy(line4, 3))
    qs = oracle.exact_q_all(chain)
    direct = np.linalg.solve(np.eye(chain.size) - 0.7 * chain.P, chain.rewards.mean(axis=0))
    assert np.abs(oracle.global_q(qs) - direct).max() <= 1e-10


def test_exact_q_rejects_unknown_method(line2):
    with pytest.raises(ValueError):
        oracle.exact_q(oracle.build_chain(line2, line2.uniform_policy()), 0, "magic")


# ---------------------------------------------------------------------------
# values and visitation


@pytest.mark.parametrize("seed", [0, 1])
def test_value_routes_agree(line4, seed):
    pol = random_policy(line4, seed)
    chain = oracle.build_chain(line4, pol)
    ref = _brute_force_value(line4, pol)
    assert oracle.exact_value(line4, pol) == pytest.approx(ref, abs=1e-10)
    assert oracle.exact_value(line4, pol, method="generic") == pytest.approx(ref, abs=1e-10)
    assert oracle.value_from_chain(chain) == pytest.approx(ref, abs=1e-10)


def test_uniform_policy_value_line8():
    # frozen from the exact linear solve; cross-checked by forward iteration on n=4
    mdp = line_env(8, 0.7)
    assert oracle.exact_value(mdp, mdp.uniform_policy()) == pytest.approx(0.30690, abs=5e-6)


def test_visitation_absorbing_state():
    kernel = np.array([[0.0, 1.0], [0.0, 1.0]])
    mdp = _single([0.0, 0.0], n_states=2, kernel=kernel)
    chain = oracle.build_chain(mdp, mdp.uniform_policy())
    pi0 = np.array([0.0, 1.0])
    assert np.allclose(oracle.discounted_visitation(chain, pi0), pi0)


def test_visitation_small_gamma_is_initial(line4):
    chain = oracle.build_chain(line4, random_policy(line4, 0))
    d = oracle.discounted_visitation(chain, gamma=1e-12)
    assert np.allclose(d, oracle.global_init(line4), atol=1e-10)


def test_visitation_matches_power_series(line4):
    chain = oracle.build_chain(line4, random_policy(line4, 5))
    Ps = chain.state_matrix()
    x = oracle.global_init(line4)
    series = np.zeros_like(x)
    T = 120
    for t in range(T + 1):
        series += 0.3 * 0.7**t * x
        x = x @ Ps
    d = oracle.discounted_visitation(chain)
    assert np.abs(d - series).max() <= 0.7 ** (T + 1) + 1e-12
    assert d.sum() == pytest.approx(1.0, abs=1e-10)


# ---------------------------------------------------------------------------
# gradients


def test_gradient_vanishes_at_saturated_optimum():
    mdp = line_env(4, 0.7)
    pol = LocalizedPolicyTable([np.array([[-12.0, 12.0], [-12.0, 12.0]])] * 4)
    grads = oracle.exact_policy_gradient(mdp, pol)
    assert max(np.linalg.norm(g) for g in grads) <= 1e-3


@settings(max_examples=15)
@given(st.integers(0, 10_000))
def test_gradient_finite_differences(seed):
    mdp = line_env(2, 0.7)
    gen = np.random.default_rng(seed)
    theta = [gen.standard_normal((2, 2)) for _ in range(2)]
    d = [gen.standard_normal((2, 2)) for _ in range(2)]
    eps = 1e-5
    up = oracle.exact_value(mdp, LocalizedPolicyTable([t + eps * v for t, v in zip(theta, d)]))
    dn = oracle.exact_value(mdp, LocalizedPolicyTable([t - eps * v for t, v in zip(theta, d)]))
    grads = oracle.exact_policy_gradient(mdp, LocalizedPolicyTable(theta))
    assert (up - dn) / (2 * eps) == pytest.approx(sum((g * v).sum() for g, v in zip(grads, d)), abs=1e-5)


def test_action_independent_weights_give_zero_gradient(line4):
    chain = oracle.build_chain(line4, random_policy(line4, 4))
    f = np.random.default_rng(0).random(chain.num_states)
    w = (f[:, None] * chain.pi).ravel(order="F")
    for i in range(4):
        assert np.abs(oracle._aggregate_gradient(chain, w, i)).max() <= 1e-12


# ---------------------------------------------------------------------------
# truncation


def test_truncation_exact_at_diameter(line4):
    chain = oracle.build_chain(line4, random_policy(line4, 6))
    for q in oracle.exact_q_all(chain):
        tq = oracle.truncated_q(q, line4.graph, 3)
        assert tq.sup_error == 0.0 and np.array_equal(tq.expanded, q.q)


def test_truncated_table_uses_learned_table_order(line4):
    chain = oracle.build_chain(line4, random_policy(line4, 7))
    q = oracle.exact_q(chain, 1)
    tq = oracle.truncated_q(q, line4.graph, 1)
    lay = NeighborhoodLayout.build(line4, 1, 1)
    s, a = oracle.all_configurations(line4)
    assert np.array_equal(tq.table[lay.encode(s, a)], tq.expanded)


def test_truncation_error_below_measured_variation(line4):
    chain = oracle.build_chain(line4, line4.uniform_policy())
    qs = oracle.exact_q_all(chain)
    prof = oracle.measure_decay(qs, line4.graph, 3)
    for i, q in enumerate(qs):
        for k in range(4):
            err = oracle.truncated_q(q, line4.graph, k).sup_error
            assert err <= prof.variation[i, k] + 1e-12
            assert err <= oracle.decay_bound(1.0, 0.7, k) + 1e-8


def test_truncation_custom_weights(line2):
    chain = oracle.build_chain(line2, random_policy(line2, 8))
    q = oracle.exact_q(chain, 0)
    head, tail = 4, 4
    w = np.zeros((head, tail))
    w[:, 0] = 1.0
    tq = oracle.truncated_q(q, Graph(2), 0, w)
    x = q.tensor().transpose([0, 2, 1, 3]).reshape(head, tail, order="F")
    assert np.allclose(tq.table, x[:, 0])
    with pytest.raises(ValueError, match="sum to 1"):
        oracle.truncated_q(q, Graph(2), 0, np.full((head, tail), 0.3))
    with pytest.raises(ValueError, match="shape"):
        oracle.truncated_q(q, Graph(2), 0, np.full((2, 2), 0.5))


def test_truncated_gradient_exact_at_diameter(line4):
    pol = random_policy(line4, 9)
    exact = oracle.exact_policy_gradient(line4, pol)
    trunc = oracle.truncated_policy_gradient(line4, pol, 3)
    assert max(np.abs(a - b).max() for a, b in zip(exact, trunc)) <= 1e-8


def test_truncated_gradient_gap_shrinks(line4):
    pol = line4.uniform_policy()
    exact = oracle.exact_policy_gradient(line4, pol)
    gaps = []
    for k in range(3):
        trunc = oracle.truncated_policy_gradient(line4, pol, k)
        gaps.append(max(np.linalg.norm(a - b) for a, b in zip(exact, trunc)))
        assert gaps[-1] <= oracle.gradient_gap_bound(1.0, 0.7, k) + 1e-8
    assert gaps[0] >= gaps[1] >= gaps[2]


def test_decay_profile_line4(line4):
    qs = oracle.exact_q_all(oracle.build_chain(line4, line4.uniform_policy()))
    prof = oracle.measure_decay(qs, line4.graph, 3)
    assert prof.is_monotone()
    assert (prof.variation[:, 3] == 0).all()
    assert (prof.variation[:, 0] > 0).any()
    assert prof.variation[0, 0] > 0


def test_decay_report_csv(tmp_path, line4):
    rows = oracle.decay_report(line4, line4.uniform_policy(), 2)
    path = tmp_path / "decay.csv"
    oracle.write_decay_csv(path, rows)
    with open(path) as fh:
        read = list(csv.DictReader(fh))
    assert list(read[0]) == oracle.DECAY_COLUMNS
    assert len(read) == 4 * 3
    for r in read:
        assert float(r["measured_variation"]) <= float(r["lemma2a_bound"]) + 1e-8
        assert float(r["trunc_q_error"]) <= float(r["lemma3a_bound"]) + 1e-8


def test_local_mixing_probe(sis3):
    chain = oracle.build_chain(sis3, sis3.uniform_policy())
    tv = oracle.local_mixing_tv(chain, 1, 30)
    assert tv.shape == (31,)
    assert (tv >= 0).all() and (tv <= 1).all()
    assert tv[-1] < tv[0]
