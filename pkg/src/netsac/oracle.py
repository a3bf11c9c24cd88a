"""Exact brute-force quantities on small networked MDPs.

Global configurations are indexed with agent 0 as the least significant
digit.  A state-action pair ``z = (s, a)`` has flat index ``s + |S| * a``,
so reshaping a vector over ``Z`` with ``order="F"`` yields a tensor with
axes ``(s_0, ..., s_{n-1}, a_0, ..., a_{n-1})``.  The same digit order is
used by :class:`netsac.sac.NeighborhoodLayout`, which lets truncated tables
computed here be compared entry by entry with learned ones.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg

from .codec import MixedRadixCodec
from .graph import Graph, khop_neighborhood
from .mdp import NetworkedMdp
from .policy import LocalizedPolicyTable

MAX_CHAIN_ENTRIES = 10**7
ROW_TOL = 1e-10
RESIDUAL_TOL = 1e-8
VI_TOL = 1e-10
SCORE_NORM = math.sqrt(2.0)


class ChainTooLarge(ValueError):
    """The requested global chain exceeds the oracle's size guard."""


def _guard(entries: int, what: str) -> None:
    if entries > MAX_CHAIN_ENTRIES:
        raise ChainTooLarge(f"{what} would hold {entries} entries (limit {MAX_CHAIN_ENTRIES})")


def _product_rows(factors: Sequence[np.ndarray]) -> np.ndarray:
    """Row-wise outer product with factor 0 as the least significant digit."""
    out = factors[-1]
    for f in reversed(factors[:-1]):
        out = (out[:, :, None] * f[:, None, :]).reshape(out.shape[0], -1)
    return out


def joint_policy_matrix(policy: LocalizedPolicyTable) -> np.ndarray:
    """``Pi[s, a] = prod_i zeta_i(a_i | s_i)`` over global states and actions."""
    # outer product over agents of (S_i, A_i) tables, then interleave axes
    n = policy.n
    t = policy.probs(0)
    for i in range(1, n):
        t = np.multiply.outer(t, policy.probs(i))
    # axes are (s_0, a_0, s_1, a_1, ...); move to (s..., a...) in F order
    t = t.transpose([2 * i for i in range(n)] + [2 * i + 1 for i in range(n)])
    s_size = math.prod(policy.probs(i).shape[0] for i in range(n))
    return t.reshape((s_size, -1), order="F")


def global_init(mdp: NetworkedMdp) -> np.ndarray:
    """Product initial distribution over global states."""
    return _product_rows([p[None, :] for p in mdp.init_probs])[0]


@dataclass(frozen=True, eq=False)
class GlobalChain:
    """Markov chain over ``Z = S x A`` induced by an MDP and a fixed policy.

    ``kernel[z, s']`` is the state transition, ``pi[s, a]`` the joint policy
    and ``P[z, z']`` their composition.  ``rewards[i]`` is agent ``i``'s
    reward vector over ``Z``.
    """

    mdp: NetworkedMdp
    policy: LocalizedPolicyTable
    kernel: np.ndarray
    pi: np.ndarray
    P: np.ndarray
    rewards: np.ndarray
    codec: MixedRadixCodec
    _lu: list = field(default_factory=list, repr=False)

    @property
    def num_states(self) -> int:
        return self.kernel.shape[1]

    @property
    def num_actions(self) -> int:
        return self.pi.shape[1]

    @property
    def size(self) -> int:
        return self.P.shape[0]

    @property
    def gamma(self) -> float:
        return self.mdp.gamma

    def lu(self):
        if not self._lu:
            self._lu.append(scipy.linalg.lu_factor(np.eye(self.size) - self.gamma * self.P))
        return self._lu[0]

    def state_matrix(self) -> np.ndarray:
        """``P_s[s, s'] = sum_a pi(a|s) kernel[(s, a), s']``."""
        k = self.kernel.reshape(self.num_states, self.num_actions, -1, order="F")
        return np.einsum("sa,sat->st", self.pi, k)


def all_configurations(mdp: NetworkedMdp) -> tuple[np.ndarray, np.ndarray]:
    """Per-agent states and actions for every ``z`` in flat order, each ``(|Z|, n)``."""
    codec = MixedRadixCodec(list(mdp.state_sizes) + list(mdp.action_sizes))
    rows = codec.decode_many(np.arange(codec.size))
    return rows[:, : mdp.n], rows[:, mdp.n :]


def build_chain(mdp: NetworkedMdp, policy: LocalizedPolicyTable) -> GlobalChain:
    z_size = mdp.num_states * mdp.num_actions
    _guard(z_size * z_size, "global chain")
    if policy.shapes != mdp.policy_shapes():
        raise ValueError("policy shapes do not match the MDP")
    s, a = all_configurations(mdp)
    local, rewards = [], []
    for i in range(mdp.n):
        nb = list(mdp.neighbors(i))
        local.append(np.asarray(mdp.local_probs(i, s[:, nb], a[:, nb]), dtype=float))
        rewards.append(np.asarray(mdp.local_reward(i, s[:, nb], a[:, nb]), dtype=float))
    kernel = _product_rows(local)
    pi = joint_policy_matrix(policy)
    n_s, n_a = pi.shape
    P = (kernel[:, None, :] * pi.T[None, :, :]).reshape(z_size, n_s * n_a)
    err = np.abs(P.sum(axis=1) - 1.0).max()
    if err > ROW_TOL:
        raise ValueError(f"chain rows deviate from 1 by {err}")
    codec = MixedRadixCodec(list(mdp.state_sizes) + list(mdp.action_sizes))
    return GlobalChain(mdp, policy, kernel, pi, P, np.stack(rewards), codec)


@dataclass(frozen=True, eq=False)
class ExactQ:
    agent: int
    q: np.ndarray
    gamma: float
    state_sizes: tuple[int, ...]
    action_sizes: tuple[int, ...]

    def tensor(self) -> np.ndarray:
        """Q as an array with axes ``(s_0..s_{n-1}, a_0..a_{n-1})``."""
        return self.q.reshape(self.state_sizes + self.action_sizes, order="F")


def value_iteration_cap(gamma: float, reward_bound: float, tol: float = VI_TOL) -> int:
    """Iterations after which the geometric tail drops below ``tol``."""
    if reward_bound <= 0:
        return 1
    return max(1, math.ceil(math.log(tol * (1 - gamma) / reward_bound) / math.log(gamma)))


def _value_iteration(P: np.ndarray, r: np.ndarray, gamma: float, reward_bound: float) -> np.ndarray:
    q = np.zeros_like(r)
    for _ in range(value_iteration_cap(gamma, reward_bound) + 1):
        nxt = r + gamma * (P @ q)
        if np.abs(nxt - q).max() <= VI_TOL * (1 - gamma):
            return nxt
        q = nxt
    return q


def bellman_residual(chain: GlobalChain, q: np.ndarray, i: int) -> float:
    return float(np.abs(q - (chain.rewards[i] + chain.gamma * chain.P @ q)).max())


def exact_q(chain: GlobalChain, i: int, method: str = "solve") -> ExactQ:
    """Solve ``(I - gamma P) Q_i = r_i``; value iteration is the fallback."""
    r = chain.rewards[i]
    if method == "solve":
        q = scipy.linalg.lu_solve(chain.lu(), r)
        if not np.all(np.isfinite(q)) or bellman_residual(chain, q, i) > RESIDUAL_TOL:
            q = _value_iteration(chain.P, r, chain.gamma, chain.mdp.reward_bound)
    elif method == "value_iteration":
        q = _value_iteration(chain.P, r, chain.gamma, chain.mdp.reward_bound)
    else:
        raise ValueError(f"unknown method {method!r}")
    res = bellman_residual(chain, q, i)
    if res > RESIDUAL_TOL:
        raise RuntimeError(f"agent {i}: Bellman residual {res} above {RESIDUAL_TOL}")
    return ExactQ(i, q, chain.gamma, chain.mdp.state_sizes, chain.mdp.action_sizes)


def exact_q_all(chain: GlobalChain) -> list[ExactQ]:
    return [exact_q(chain, i) for i in range(chain.mdp.n)]


def global_q(qs: Sequence[ExactQ]) -> np.ndarray:
    """``Q = (1/n) sum_i Q_i``."""
    return np.mean([q.q for q in qs], axis=0)


def discounted_visitation(chain: GlobalChain, pi0: np.ndarray | None = None, gamma: float | None = None) -> np.ndarray:
    """``(1 - gamma) sum_t gamma^t Pr[s(t) = s]`` via one linear solve."""
    gamma = chain.gamma if gamma is None else gamma
    pi0 = global_init(chain.mdp) if pi0 is None else np.asarray(pi0, dtype=float)
    Ps = chain.state_matrix()
    d = (1 - gamma) * np.linalg.solve((np.eye(len(pi0)) - gamma * Ps).T, pi0)
    if abs(d.sum() - 1.0) > ROW_TOL:
        raise RuntimeError(f"visitation sums to {d.sum()}")
    return d


# ---------------------------------------------------------------------------
# policy value


def _factorized_state_chain(mdp: NetworkedMdp, policy: LocalizedPolicyTable) -> tuple[np.ndarray, np.ndarray]:
    """State transition matrix and expected reward when kernels ignore neighbor actions."""
    codec = MixedRadixCodec(list(mdp.state_sizes))
    s = codec.decode_many(np.arange(codec.size))
    factors = []
    r = np.zeros(codec.size)
    for i in range(mdp.n):
        nb = list(mdp.neighbors(i))
        me = nb.index(i)
        probs = policy.probs(i)
        step = np.zeros((codec.size, mdp.spaces[i].state_size))
        for ai in range(mdp.spaces[i].action_size):
            a_nbr = np.zeros((codec.size, len(nb)), dtype=np.int64)
            a_nbr[:, me] = ai
            w = probs[s[:, i], ai]
            step += w[:, None] * mdp.local_probs(i, s[:, nb], a_nbr)
            r += w * mdp.local_reward(i, s[:, nb], a_nbr)
        factors.append(step)
    return _product_rows(factors), r / mdp.n


def _generic_state_chain(mdp: NetworkedMdp, policy: LocalizedPolicyTable, chunk: int = 2**16) -> tuple[np.ndarray, np.ndarray]:
    """Same as the factorized chain, summing over joint actions explicitly."""
    n_s, n_a = mdp.num_states, mdp.num_actions
    s_all = MixedRadixCodec(list(mdp.state_sizes)).decode_many(np.arange(n_s))
    a_all = MixedRadixCodec(list(mdp.action_sizes)).decode_many(np.arange(n_a))
    pi = joint_policy_matrix(policy)
    Ps = np.zeros((n_s, n_s))
    r = np.zeros(n_s)
    per = max(1, chunk // n_a)
    for lo in range(0, n_s, per):
        ss = np.arange(lo, min(lo + per, n_s))
        s = np.repeat(s_all[ss], n_a, axis=0)
        a = np.tile(a_all, (len(ss), 1))
        w = pi[ss].ravel()
        factors, rew = [], np.zeros(len(w))
        for i in range(mdp.n):
            nb = list(mdp.neighbors(i))
            factors.append(mdp.local_probs(i, s[:, nb], a[:, nb]))
            rew += mdp.local_reward(i, s[:, nb], a[:, nb])
        K = _product_rows(factors) * w[:, None]
        Ps[ss] = K.reshape(len(ss), n_a, n_s).sum(axis=1)
        r[ss] = (rew * w).reshape(len(ss), n_a).sum(axis=1) / mdp.n
    return Ps, r


def policy_state_chain(mdp: NetworkedMdp, policy: LocalizedPolicyTable, method: str = "auto") -> tuple[np.ndarray, np.ndarray]:
    """``(P_s, r_pi)``: state-level chain and expected global reward under ``policy``."""
    _guard(mdp.num_states**2, "state chain")
    if method == "auto":
        method = "factorized" if mdp.own_action_only else "generic"
    if method == "factorized":
        if not mdp.own_action_only:
            raise ValueError("factorized evaluation needs kernels that ignore neighbor actions")
        return _factorized_state_chain(mdp, policy)
    if method == "generic":
        _guard(mdp.num_states * mdp.num_actions, "joint action enumeration")
        return _generic_state_chain(mdp, policy)
    raise ValueError(f"unknown method {method!r}")


def exact_value(mdp: NetworkedMdp, policy: LocalizedPolicyTable, method: str = "auto") -> float:
    """``J(theta) = E_{s ~ pi_0}[sum_t gamma^t r(s(t), a(t))]``."""
    Ps, r = policy_state_chain(mdp, policy, method)
    v = np.linalg.solve(np.eye(len(r)) - mdp.gamma * Ps, r)
    return float(global_init(mdp) @ v)


def value_from_chain(chain: GlobalChain, qs: Sequence[ExactQ] | None = None) -> float:
    """``J`` through the Q-functions: ``sum_z pi_0(s) pi(a|s) Q(z)``."""
    qs = exact_q_all(chain) if qs is None else qs
    start = (global_init(chain.mdp)[:, None] * chain.pi).ravel(order="F")
    return float(start @ global_q(qs))


# ---------------------------------------------------------------------------
# gradients


def _aggregate_gradient(chain: GlobalChain, weights: np.ndarray, i: int) -> np.ndarray:
    """``sum_z weights[z] * score_i(s_i, a_i)`` where ``score = e_a - zeta_i(.|s_i)``."""
    sizes = chain.mdp.state_sizes + chain.mdp.action_sizes
    n = chain.mdp.n
    t = weights.reshape(sizes, order="F")
    other = tuple(ax for ax in range(2 * n) if ax not in (i, n + i))
    c = t.sum(axis=other)  # (S_i, A_i)
    return c - chain.policy.probs(i) * c.sum(axis=1, keepdims=True)


def _state_action_weights(chain: GlobalChain) -> np.ndarray:
    """``d(s) pi(a|s) / (1 - gamma)`` over ``Z``."""
    d = discounted_visitation(chain)
    return (d[:, None] * chain.pi).ravel(order="F") / (1 - chain.gamma)


def exact_policy_gradient(mdp: NetworkedMdp, policy: LocalizedPolicyTable, chain: GlobalChain | None = None) -> list[np.ndarray]:
    chain = build_chain(mdp, policy) if chain is None else chain
    q = global_q(exact_q_all(chain))
    w = _state_action_weights(chain) * q
    return [_aggregate_gradient(chain, w, i) for i in range(mdp.n)]


def _split_axes(mdp: NetworkedMdp, i: int, kappa: int) -> tuple[list[int], list[int], tuple[int, ...]]:
    members = khop_neighborhood(mdp.graph, i, kappa).members
    n = mdp.n
    head = list(members) + [n + j for j in members]
    tail = [j for j in range(n) if j not in members] + [n + j for j in range(n) if j not in members]
    return head, tail, tuple(members)


@dataclass(frozen=True, eq=False)
class TruncatedQ:
    """Truncated table over ``(s_{N_i^kappa}, a_{N_i^kappa})``.

    ``table`` uses the same flat order as a learned table of the same agent
    and radius; ``sup_error`` is ``max_z |Q_hat(head(z)) - Q(z)|``.
    """

    agent: int
    kappa: int
    members: tuple[int, ...]
    table: np.ndarray
    expanded: np.ndarray
    sup_error: float


def truncated_q(exact: ExactQ, graph: Graph, kappa: int, weights: np.ndarray | None = None) -> TruncatedQ:
    """Average ``Q_i`` over tail configurations with the given weights.

    ``weights`` has shape ``(head_size, tail_size)`` with rows summing to 1;
    both indices use agent-ascending, states-then-actions, least-significant
    first order.  The default is uniform.
    """
    n = len(exact.state_sizes)
    members = khop_neighborhood(graph, exact.agent, kappa).members
    head = list(members) + [n + j for j in members]
    tail = [ax for ax in range(2 * n) if ax not in head]
    t = exact.tensor().transpose(head + tail)
    dims = t.shape
    h_size = math.prod(dims[: len(head)])
    x = t.reshape((h_size, -1), order="F")
    if weights is None:
        table = x.mean(axis=1)
    else:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != x.shape:
            raise ValueError(f"weights must have shape {x.shape}, got {weights.shape}")
        if (weights < 0).any() or np.abs(weights.sum(axis=1) - 1.0).max() > 1e-10:
            raise ValueError("truncation weights must be non-negative and sum to 1 per head")
        table = (x * weights).sum(axis=1)
    err = float(np.abs(x - table[:, None]).max())
    # map back to Z so callers can compare with Q_i directly
    back = np.broadcast_to(table[:, None], x.shape).reshape(dims, order="F")
    inv = np.argsort(head + tail)
    expanded = back.transpose(inv).ravel(order="F")
    return TruncatedQ(exact.agent, kappa, tuple(members), table, expanded, err)


def truncated_policy_gradient(
    mdp: NetworkedMdp, policy: LocalizedPolicyTable, kappa: int, chain: GlobalChain | None = None
) -> list[np.ndarray]:
    """Exact evaluation of the kappa-hop truncated gradient ``h_hat_i``."""
    chain = build_chain(mdp, policy) if chain is None else chain
    qs = exact_q_all(chain)
    trunc = [truncated_q(q, mdp.graph, kappa).expanded for q in qs]
    base = _state_action_weights(chain)
    grads = []
    for i in range(mdp.n):
        members = khop_neighborhood(mdp.graph, i, kappa).members
        w = base * sum(trunc[j] for j in members) / mdp.n
        grads.append(_aggregate_gradient(chain, w, i))
    return grads


# ---------------------------------------------------------------------------
# decay


def decay_bound(reward_bound: float, gamma: float, kappa: int) -> float:
    """``(r_bar / (1 - gamma)) * gamma^(kappa + 1)``."""
    return reward_bound / (1 - gamma) * gamma ** (kappa + 1)


def gradient_gap_bound(reward_bound: float, gamma: float, kappa: int) -> float:
    """``(sqrt(2) c / (1 - gamma)) * gamma^(kappa + 1)`` with ``c = r_bar / (1 - gamma)``."""
    return SCORE_NORM * decay_bound(reward_bound, gamma, kappa) / (1 - gamma)


@dataclass(frozen=True)
class DecayProfile:
    """``variation[i, kappa]``: largest change of ``Q_i`` when only the tail moves."""

    variation: np.ndarray

    def is_monotone(self, tol: float = 1e-12) -> bool:
        return bool((np.diff(self.variation, axis=1) <= tol).all())


def head_variation(exact: ExactQ, graph: Graph, kappa: int) -> float:
    n = len(exact.state_sizes)
    members = khop_neighborhood(graph, exact.agent, kappa).members
    head = list(members) + [n + j for j in members]
    tail = [ax for ax in range(2 * n) if ax not in head]
    if not tail:
        return 0.0
    t = exact.tensor()
    return float((t.max(axis=tuple(tail)) - t.min(axis=tuple(tail))).max())


def measure_decay(exact: Sequence[ExactQ], graph: Graph, kappa_max: int) -> DecayProfile:
    var = np.array([[head_variation(q, graph, k) for k in range(kappa_max + 1)] for q in exact])
    return DecayProfile(var)


DECAY_COLUMNS = ["agent", "kappa", "measured_variation", "lemma2a_bound", "trunc_q_error", "lemma3a_bound"]


def decay_report(mdp: NetworkedMdp, policy: LocalizedPolicyTable, kappa_max: int) -> list[dict]:
    chain = build_chain(mdp, policy)
    qs = exact_q_all(chain)
    prof = measure_decay(qs, mdp.graph, kappa_max)
    rows = []
    for i, q in enumerate(qs):
        for k in range(kappa_max + 1):
            bound = decay_bound(mdp.reward_bound, mdp.gamma, k)
            rows.append(
                {
                    "agent": i,
                    "kappa": k,
                    "measured_variation": float(prof.variation[i, k]),
                    "lemma2a_bound": bound,
                    "trunc_q_error": truncated_q(q, mdp.graph, k).sup_error,
                    "lemma3a_bound": bound,
                }
            )
    return rows


def write_decay_csv(path: str | Path, rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DECAY_COLUMNS)
        for row in rows:
            w.writerow([row["agent"], row["kappa"]] + [repr(float(row[c])) for c in DECAY_COLUMNS[2:]])


def local_mixing_tv(chain: GlobalChain, agent: int, horizon: int) -> np.ndarray:
    """Total-variation distance between the ``(s_i, a_i)`` marginal at time
    ``t`` and its long-run average, for ``t = 0..horizon``.

    The long-run average is the Cesaro limit, approximated by averaging the
    marginals over a window far beyond ``horizon``.
    """
    mdp = chain.mdp
    start = (global_init(mdp)[:, None] * chain.pi).ravel(order="F")
    sizes = mdp.state_sizes + mdp.action_sizes
    n = mdp.n
    other = tuple(ax for ax in range(2 * n) if ax not in (agent, n + agent))

    def marginal(d):
        return d.reshape(sizes, order="F").sum(axis=other)

    margins = []
    d = start
    window = max(10 * horizon, 1000)
    tail_sum = None
    for t in range(horizon + 1 + window):
        if t <= horizon:
            margins.append(marginal(d))
        if t > horizon:
            m = marginal(d)
            tail_sum = m if tail_sum is None else tail_sum + m
        d = d @ chain.P
    limit = tail_sum / window
    return np.array([0.5 * np.abs(m - limit).sum() for m in margins])
