from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from netsac import oracle
from netsac.envs import (
    TrafficEnv,
    WirelessGridEnv,
    aloha_policy,
    line_env,
    sis_env,
    sis_transition,
    traffic_transition,
    wireless_transition,
)
from netsac.envs.sis import SisEnv
from netsac.graph import Graph
from netsac.mdp import simulate
from netsac.policy import LocalizedPolicyTable


def _two_users(arrival=(0.0, 0.0), success=None, deadline=2):
    """Users on blocks (0,0) and (0,1) of a 1x2 grid share access points 1 and 4."""
    success = np.ones(6) if success is None else np.asarray(success)
    return WirelessGridEnv.from_parameters(1, 2, 0.7, [deadline] * 2, arrival, success, [(0, 0), (0, 1)])


# ---------------------------------------------------------------------------
# kernels


@pytest.mark.parametrize(
    "make",
    [
        lambda: line_env(4, 0.7),
        lambda: sis_env(Graph.ring(4), 0.8, 0.3, [[0.6, 0.2]], [[0.0, 0.4]]),
        lambda: WirelessGridEnv.create(3, 3, 0.7, seed=5).build(),
        lambda: WirelessGridEnv.create(2, 2, 0.7, seed=1, deadline=3, random_placement=True).build(),
        lambda: TrafficEnv.ring(3, 2, [0.2, 0.5, 0.3], 0.7).build(),
    ],
    ids=["line", "sis", "wireless", "wireless-random", "traffic"],
)
def test_kernel_rows_are_distributions(make):
    make().check_kernels()


# ---------------------------------------------------------------------------
# line


def test_line_optimum():
    mdp = line_env(8, 0.7)
    assert mdp.optimal_value == pytest.approx(0.416667, abs=1e-6)
    ones = LocalizedPolicyTable.from_probs([np.array([[0.0, 1.0], [0.0, 1.0]])] * 8)
    assert oracle.exact_value(mdp, ones) == pytest.approx(1 / 8 / 0.3, abs=1e-12)


def test_line_all_zeros_policy():
    # agent 0 copies agent 1, which drops to 0 after one step: reward at t = 0, 1 only
    mdp = line_env(8, 0.7)
    zeros = LocalizedPolicyTable.from_probs([np.array([[1.0, 0.0], [1.0, 0.0]])] * 8)
    assert oracle.exact_value(mdp, zeros) == pytest.approx(0.2125, abs=1e-12)
    S, _, R = simulate(mdp, zeros, 1, 12, seed=0)
    assert (S[0, 8:] == 0).all() and (R[0, 2:] == 0).all()


def test_line_last_node_follows_action():
    mdp = line_env(3, 0.7)
    p = mdp.local_probs(2, np.array([[0, 0]]), np.array([[0, 1]]))[0]
    assert p.tolist() == [0.0, 1.0]


# ---------------------------------------------------------------------------
# wireless


def test_wireless_spaces_and_neighbors():
    env = WirelessGridEnv.create(3, 3, 0.7, seed=0)
    assert all(sp.state_size == 4 and sp.action_size == 5 for sp in env.spaces())
    g = env.conflict_graph()
    for i, j in g.edges:
        assert set(env.access[i]) & set(env.access[j])
    assert ((env.arrival >= 0) & (env.arrival <= 1)).all()


def test_wireless_empty_queue_stays_empty():
    env = _two_users()
    gen = np.random.default_rng(0)
    for a in range(5):
        s_next, r = wireless_transition(env, 0, [0, 0], [a, 0], gen)
        assert s_next == 0 and r == 0.0


def test_wireless_uncontended_send():
    env = _two_users()
    s_next, r = wireless_transition(env, 0, [3, 0], [1, 0], np.random.default_rng(0))
    # (e1, e2) = (1, 1) -> earliest packet leaves, remaining one shifts to e1
    assert s_next == 0b01 and r == 1.0


def test_wireless_conflict():
    env = _two_users()
    shared = 1  # access point 1 is user 0's second and user 1's first
    a0 = env.access[0].index(shared) + 1
    a1 = env.access[1].index(shared) + 1
    gen = np.random.default_rng(0)
    s0, r0 = wireless_transition(env, 0, [3, 2], [a0, a1], gen)
    s1, r1 = wireless_transition(env, 1, [3, 2], [a0, a1], gen)
    assert (r0, r1) == (0.0, 0.0)
    assert (s0, s1) == (0b01, 0b01)


def test_wireless_null_action_drops_expired_packet():
    env = _two_users(arrival=(1.0, 1.0))
    s_next, r = wireless_transition(env, 0, [1, 0], [0, 0], np.random.default_rng(0))
    assert s_next == 0b10 and r == 0.0


def test_wireless_rejects_bad_action():
    env = _two_users()
    with pytest.raises(ValueError):
        wireless_transition(env, 0, [1, 0], [5, 0], np.random.default_rng(0))


@given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 4), st.integers(0, 4), st.integers(0, 2**31))
def test_wireless_simulator_matches_exact_kernel_support(s0, s1, a0, a1, seed):
    env = WirelessGridEnv.from_parameters(1, 2, 0.7, [2, 2], [0.3, 0.6], np.linspace(0.1, 0.9, 6), [(0, 0), (0, 1)])
    mdp = env.build()
    u = np.random.default_rng(seed).random((2, 2))
    s_next, r = mdp.simulator.step(np.array([s0, s1]), np.array([a0, a1]), u)
    for i in range(2):
        p = env.local_probs(i, np.array([[s0, s1]]), np.array([[a0, a1]]))[0]
        assert p[s_next[i]] > 0
        q = env.success_prob(i, np.array([[s0, s1]]), np.array([[a0, a1]]))[0]
        assert r[i] <= (q > 0)


def test_wireless_simulator_frequencies():
    env = WirelessGridEnv.create(2, 2, 0.7, seed=3)
    mdp = env.build()
    pol = aloha_policy(env, 0.5)
    episodes = 50_000
    s0 = np.array([3, 1, 2, 3])
    S, A, _ = simulate(mdp, pol, episodes, 2, seed=4, s0=s0)
    i = 0
    nb = list(mdp.neighbors(i))
    probs = env.local_probs(i, np.broadcast_to(s0[nb], (episodes, len(nb))), A[:, 0, nb])
    expected = probs.mean(axis=0)
    freq = np.bincount(S[:, 1, i], minlength=4) / episodes
    se = np.sqrt(expected * (1 - expected) / episodes)
    assert (np.abs(freq - expected) <= 4 * se + 1e-12).all()


@given(st.integers(0, 2**31))
def test_wireless_queue_never_exceeds_deadline_bits(seed):
    env = WirelessGridEnv.create(2, 3, 0.7, seed=seed % 100, deadline=3)
    mdp = env.build()
    S, A, R = simulate(mdp, mdp.uniform_policy(), 2, 30, seed=seed)
    assert (S < 8).all()
    # success implies a non-null send from a non-empty queue
    sent = (A > 0) & (S > 0)
    assert not ((R > 0) & ~sent).any()


def test_aloha_empty_queue_is_null():
    env = WirelessGridEnv.create(3, 3, 0.7, seed=0)
    pol = aloha_policy(env, 0.7)
    for i in range(env.n):
        assert pol.action_probs(i, 0)[0] == pytest.approx(1.0)


def test_aloha_proportional_choice():
    env = WirelessGridEnv.from_parameters(
        1, 2, 0.7, [2, 2], [0.5, 0.5], [0.6, 0.6, 0.9, 0.6, 0.3, 0.9], [(0, 0), (0, 1)]
    )
    # user 0 reaches aps (0, 1, 3, 4); sharers (1, 2, 1, 2); q/sharers = (0.6, 0.3, 0.6, 0.15)
    pol = aloha_policy(env, 1.0)
    p = pol.action_probs(0, 1)
    w = np.array([0.6, 0.3, 0.6, 0.15])
    assert p[0] == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(p[1:], w / w.sum())


def test_aloha_single_access_point():
    env = WirelessGridEnv.from_parameters(1, 1, 0.7, [2], [0.5], [0.5, 0.0, 0.0, 0.0], [(0, 0)])
    p = aloha_policy(env, 1.0).action_probs(0, 2)
    assert p[1] == pytest.approx(1.0)


@pytest.mark.parametrize("send", [-0.1, 1.5])
def test_aloha_rejects_bad_probability(send):
    with pytest.raises(ValueError):
        aloha_policy(WirelessGridEnv.create(2, 2, 0.7, seed=0), send)


# ---------------------------------------------------------------------------
# SIS


def _sis(delta=0.3, beta=0.5):
    return SisEnv.create(Graph.line(3), 0.7, delta, [[beta, beta]], [[0.0, 0.2]])


def test_sis_susceptible_without_infected_neighbors():
    env = _sis()
    assert env.local_probs(1, [0, 0, 0], 0)[0] == 1.0


def test_sis_recovery_certain():
    env = SisEnv.create(Graph.line(3), 0.7, 1.0, [[0.5, 0.5]], [[0.0, 0.0]])
    assert env.local_probs(0, [1, 1], 0)[0] == 1.0
    gen = np.random.default_rng(0)
    assert all(sis_transition(env, 0, [1, 1], 0, gen) == 0 for _ in range(100))
    with pytest.raises(ValueError):
        SisEnv.create(Graph.line(3), 0.7, 1.5, [[0.5, 0.5]], [[0.0, 0.0]])


def test_sis_two_infected_neighbors():
    env = _sis(beta=0.5)
    assert env.local_probs(1, [1, 0, 1], 0)[0] == pytest.approx(0.25)
    gen = np.random.default_rng(0)
    draws = [sis_transition(env, 1, [1, 0, 1], 0, gen) for _ in range(4000)]
    assert np.mean(np.array(draws) == 0) == pytest.approx(0.25, abs=3 * np.sqrt(0.25 * 0.75 / 4000))


def test_sis_rewards_in_unit_interval():
    env = SisEnv.create(Graph.line(3), 0.7, 0.3, [[0.6, 0.2]], [[0.0, 0.5]])
    vals = [env.local_reward(0, s, a) for s in range(2) for a in range(2)]
    assert min(vals) == pytest.approx(0.0) and max(vals) == pytest.approx(1.0)
    # affine: the argmax over actions is unchanged
    raw = [[float(s == 0) - c for c in (0.0, 0.5)] for s in range(2)]
    for s in range(2):
        assert np.argmax(raw[s]) == np.argmax([env.local_reward(0, s, a) for a in range(2)])


def test_sis_expected_recoveries():
    n = 5
    delta = np.array([0.1, 0.2, 0.3, 0.4, 0.5])
    mdp = sis_env(Graph.ring(n), 0.7, delta, [[0.3, 0.3]], [[0.0, 0.0]], init_infected=1.0)
    episodes = 40_000
    S, _, _ = simulate(mdp, mdp.uniform_policy(), episodes, 2, seed=2)
    assert (S[:, 0] == 1).all()
    recoveries = (S[:, 1] == 0).sum(axis=1)
    se = recoveries.std(ddof=1) / np.sqrt(episodes)
    assert abs(recoveries.mean() - delta.sum()) <= 3 * se


# ---------------------------------------------------------------------------
# traffic


def _single_turn(cap_probs, capacity=4):
    return TrafficEnv.create(2, [(0, 1)], capacity, cap_probs, 0.7)


def test_traffic_signals_off_no_change():
    env = TrafficEnv.ring(3, 3, [0.2, 0.5, 0.3], 0.7)
    gen = np.random.default_rng(0)
    nb = env.graph.closed_neighbors(0)
    s = [env.encode_queues(j, (1, 2)) for j in nb]
    for _ in range(20):
        assert traffic_transition(env, 0, s, [0] * len(nb), gen) == s[nb.index(0)]


def test_traffic_clamps_at_capacity():
    env = TrafficEnv.ring(3, 2, [0.0, 0.0, 1.0], 0.7)
    nb = env.graph.closed_neighbors(1)
    full = env.encode_queues(1, (2, 2))
    s = [full if j == 1 else env.encode_queues(j, (2, 2)) for j in nb]
    a = [0 if j == 1 else 3 for j in nb]  # link 1 holds, upstream links send on every turn
    p = env.next_state_probs(1, s, a)
    assert p[full] == pytest.approx(1.0)


def test_traffic_single_link_outflow():
    env = _single_turn([0.0, 0.0, 1.0])
    s = [env.encode_queues(0, (3,)), 0]
    nxt = traffic_transition(env, 0, s, [1, 0], np.random.default_rng(0))
    assert env.queues(0, nxt) == (1,)


def test_traffic_kernel_matches_sampler():
    env = TrafficEnv.ring(3, 2, [0.3, 0.4, 0.3], 0.7)
    nb = env.graph.closed_neighbors(0)
    s = [env.encode_queues(j, (1, 2)) for j in nb]
    a = [3, 1, 2][: len(nb)]
    p = env.next_state_probs(0, s, a)
    gen = np.random.default_rng(1)
    draws = np.array([traffic_transition(env, 0, s, a, gen) for _ in range(20000)])
    freq = np.bincount(draws, minlength=len(p)) / len(draws)
    se = np.sqrt(p * (1 - p) / len(draws))
    assert (np.abs(freq - p) <= 4 * se + 1e-12).all()


def test_traffic_reward_scaling():
    env = TrafficEnv.ring(3, 2, [0.5, 0.5], 0.7)
    assert env.reward_of(0, env.encode_queues(0, (0, 0))) == 1.0
    assert env.reward_of(0, env.encode_queues(0, (2, 2))) == 0.0
    assert env.reward_of(0, env.encode_queues(0, (1, 2))) == pytest.approx(0.25)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(turns=[(0, 0)]),
        dict(capacity=0),
        dict(capacity_probs=[0.5, 0.4]),
        dict(routing=[[0.5, 0.4], [1.0], [1.0]]),
    ],
)
def test_traffic_rejects_invalid(kwargs):
    base = dict(n_links=3, turns=[(0, 1), (0, 2), (1, 2), (2, 0)], capacity=2, capacity_probs=[0.5, 0.5], gamma=0.7)
    base.update(kwargs)
    with pytest.raises(ValueError):
        TrafficEnv.create(**base)
