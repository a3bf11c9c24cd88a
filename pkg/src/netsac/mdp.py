"""Networked MDPs: factorized local kernels, exact probabilities and sampling.

Every agent's kernel and reward take the states and actions of its closed
neighborhood ``N_i`` (sorted, including ``i``) as ``(B, |N_i|)`` integer
batches.  Environments whose dynamics only use the agent's own action simply
ignore the neighbor action columns and set ``own_action_only``.

Sampling goes through a :class:`Simulator`, which consumes pre-drawn uniforms
so that per-agent random streams stay independent of evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numba
import numpy as np

from . import rng as rngmod
from .codec import MixedRadixCodec
from .graph import Graph
from .policy import LocalizedPolicyTable

LocalFn = Callable[[int, np.ndarray, np.ndarray], np.ndarray]

KERNEL_TOL = 1e-12


@dataclass(frozen=True)
class LocalSpace:
    state_size: int
    action_size: int

    def __post_init__(self):
        if self.state_size < 1 or self.action_size < 1:
            raise ValueError(f"local spaces must be non-empty, got {self}")


class Simulator:
    """Samples transitions from uniforms.

    ``uniforms_per_agent`` uniforms are consumed by every agent at every step.
    Subclasses override :meth:`step`; jitted ones also override :meth:`run`.
    """

    uniforms_per_agent = 1

    def step(self, s: np.ndarray, a: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def run(self, s0, a_cum, a_sizes, u_act, u_trans):
        """Simulate ``E`` episodes of ``H`` steps.

        Returns ``(states, actions, rewards)`` of shapes ``(E, H, n)``.
        """
        E, H, n = u_act.shape
        S = np.empty((E, H, n), dtype=np.int64)
        A = np.empty((E, H, n), dtype=np.int64)
        R = np.empty((E, H, n))
        for e in range(E):
            s = s0[e].copy()
            for t in range(H):
                a = _sample_actions(a_cum, a_sizes, s, u_act[e, t])
                S[e, t], A[e, t] = s, a
                s, R[e, t] = self.step(s, a, u_trans[e, t])
        return S, A, R


def _sample_actions(a_cum, a_sizes, s, u):
    a = np.empty(len(s), dtype=np.int64)
    for i in range(len(s)):
        row = a_cum[i, s[i], : a_sizes[i]]
        a[i] = min(int(np.searchsorted(row, u[i], side="right")), a_sizes[i] - 1)
    return a


@dataclass(frozen=True, eq=False)
class NetworkedMdp:
    name: str
    graph: Graph
    spaces: tuple[LocalSpace, ...]
    gamma: float
    reward_bound: float
    init_probs: tuple[np.ndarray, ...]
    local_probs: LocalFn
    local_reward: LocalFn
    simulator: Simulator
    own_action_only: bool = False
    optimal_value: Optional[float] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if len(self.spaces) != self.graph.n or len(self.init_probs) != self.graph.n:
            raise ValueError("need one local space and one initial distribution per agent")
        for i, (p, sp) in enumerate(zip(self.init_probs, self.spaces)):
            if p.shape != (sp.state_size,) or abs(p.sum() - 1.0) > KERNEL_TOL or (p < 0).any():
                raise ValueError(f"agent {i}: invalid initial distribution {p}")

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def state_sizes(self) -> tuple[int, ...]:
        return tuple(sp.state_size for sp in self.spaces)

    @property
    def action_sizes(self) -> tuple[int, ...]:
        return tuple(sp.action_size for sp in self.spaces)

    @property
    def num_states(self) -> int:
        return math.prod(self.state_sizes)

    @property
    def num_actions(self) -> int:
        return math.prod(self.action_sizes)

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self.graph.closed_neighbors(i)

    def local_codec(self, i: int) -> MixedRadixCodec:
        """Codec for ``(s_{N_i}, a_{N_i})`` rows: states first, then actions."""
        nb = self.neighbors(i)
        return MixedRadixCodec([self.spaces[j].state_size for j in nb] + [self.spaces[j].action_size for j in nb])

    def policy_shapes(self) -> list[tuple[int, int]]:
        return [(sp.state_size, sp.action_size) for sp in self.spaces]

    def uniform_policy(self) -> LocalizedPolicyTable:
        return LocalizedPolicyTable.uniform(self.policy_shapes())

    def check_kernels(self, max_rows: int = 20000, seed: int = 0) -> None:
        """Validate kernel rows and reward ranges.

        All ``(s_{N_i}, a_{N_i})`` rows are checked when there are at most
        ``max_rows`` of them, otherwise a seeded random sample is.
        """
        gen = np.random.default_rng(seed)
        for i in range(self.n):
            codec = self.local_codec(i)
            if codec.size <= max_rows:
                rows = codec.decode_many(np.arange(codec.size))
            else:
                rows = np.stack([gen.integers(0, r, size=max_rows) for r in codec.radices], axis=1)
            k = len(self.neighbors(i))
            p = self.local_probs(i, rows[:, :k], rows[:, k:])
            r = self.local_reward(i, rows[:, :k], rows[:, k:])
            if p.shape != (len(rows), self.spaces[i].state_size):
                raise ValueError(f"agent {i}: kernel returned shape {p.shape}")
            if (p < 0).any() or np.abs(p.sum(axis=1) - 1.0).max() > KERNEL_TOL:
                raise ValueError(f"agent {i}: kernel rows are not probability distributions")
            if (r < 0).any() or (r > self.reward_bound + KERNEL_TOL).any():
                raise ValueError(f"agent {i}: rewards outside [0, {self.reward_bound}]")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States, actions and per-agent rewards for ``t = 0..T``."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    seed: tuple[int, ...]

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def horizon(self) -> int:
        return len(self) - 1


# ---------------------------------------------------------------------------
# tabular models


@numba.njit(cache=True)
def _tabular_step(nbr, nbr_len, mult_s, mult_a, row_off, kernel_cum, n_states, rew, s, a, u, s_out, r_out):
    n = s.shape[0]
    for i in range(n):
        row = row_off[i]
        for k in range(nbr_len[i]):
            j = nbr[i, k]
            row += s[j] * mult_s[i, k] + a[j] * mult_a[i, k]
        r_out[i] = rew[row]
        x = 0
        last = n_states[i] - 1
        while x < last and u[i, 0] >= kernel_cum[row, x]:
            x += 1
        s_out[i] = x


@numba.njit(cache=True)
def _sample_actions_jit(a_cum, a_sizes, s, u, a):
    for i in range(s.shape[0]):
        k = 0
        last = a_sizes[i] - 1
        while k < last and u[i] >= a_cum[i, s[i], k]:
            k += 1
        a[i] = k


@numba.njit(cache=True)
def _tabular_run(nbr, nbr_len, mult_s, mult_a, row_off, kernel_cum, n_states, rew, s0, a_cum, a_sizes, u_act, u_trans):
    E, H, n = u_act.shape
    S = np.empty((E, H, n), dtype=np.int64)
    A = np.empty((E, H, n), dtype=np.int64)
    R = np.empty((E, H, n))
    s = np.empty(n, dtype=np.int64)
    a = np.empty(n, dtype=np.int64)
    s_next = np.empty(n, dtype=np.int64)
    r = np.empty(n)
    for e in range(E):
        s[:] = s0[e]
        for t in range(H):
            _sample_actions_jit(a_cum, a_sizes, s, u_act[e, t], a)
            _tabular_step(nbr, nbr_len, mult_s, mult_a, row_off, kernel_cum, n_states, rew, s, a, u_trans[e, t], s_next, r)
            S[e, t] = s
            A[e, t] = a
            R[e, t] = r
            s[:] = s_next
    return S, A, R


class TabularSimulator(Simulator):
    """Samples from dense per-agent tables indexed by ``(s_{N_i}, a_{N_i})``."""

    uniforms_per_agent = 1

    def __init__(self, graph: Graph, spaces: Sequence[LocalSpace], kernels: Sequence[np.ndarray], rewards: Sequence[np.ndarray]):
        n = graph.n
        nbrs = [graph.closed_neighbors(i) for i in range(n)]
        width = max(len(nb) for nb in nbrs)
        self.nbr = np.zeros((n, width), dtype=np.int64)
        self.nbr_len = np.array([len(nb) for nb in nbrs], dtype=np.int64)
        self.mult_s = np.zeros((n, width), dtype=np.int64)
        self.mult_a = np.zeros((n, width), dtype=np.int64)
        offsets = np.cumsum([0] + [len(r) for r in rewards])
        self.row_off = offsets[:-1].astype(np.int64)
        s_max = max(sp.state_size for sp in spaces)
        self.kernel_cum = np.ones((offsets[-1], s_max))
        self.rew = np.concatenate([np.asarray(r, dtype=np.float64) for r in rewards])
        self.n_states = np.array([sp.state_size for sp in spaces], dtype=np.int64)
        for i, nb in enumerate(nbrs):
            radices = [spaces[j].state_size for j in nb] + [spaces[j].action_size for j in nb]
            codec = MixedRadixCodec(radices)
            if codec.size != len(rewards[i]):
                raise ValueError(f"agent {i}: table has {len(rewards[i])} rows, expected {codec.size}")
            self.nbr[i, : len(nb)] = nb
            self.mult_s[i, : len(nb)] = codec.multipliers[: len(nb)]
            self.mult_a[i, : len(nb)] = codec.multipliers[len(nb):]
            c = np.cumsum(kernels[i], axis=1)
            c[:, -1] = 1.0
            self.kernel_cum[self.row_off[i] : self.row_off[i] + len(c), : c.shape[1]] = c

    def _params(self):
        return (self.nbr, self.nbr_len, self.mult_s, self.mult_a, self.row_off, self.kernel_cum, self.n_states, self.rew)

    def step(self, s, a, u):
        s_out = np.empty(len(s), dtype=np.int64)
        r_out = np.empty(len(s))
        _tabular_step(*self._params(), np.asarray(s, np.int64), np.asarray(a, np.int64), np.asarray(u, np.float64).reshape(len(s), -1), s_out, r_out)
        return s_out, r_out

    def run(self, s0, a_cum, a_sizes, u_act, u_trans):
        return _tabular_run(*self._params(), s0, a_cum, a_sizes, u_act, u_trans)


def tabulate(graph: Graph, spaces: Sequence[LocalSpace], fn) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Build dense tables from ``fn(i, s_nbr, a_nbr) -> (probs, reward)``.

    ``s_nbr``/``a_nbr`` are tuples ordered like ``graph.closed_neighbors(i)``.
    """
    kernels, rewards = [], []
    for i in range(graph.n):
        nb = graph.closed_neighbors(i)
        codec = MixedRadixCodec([spaces[j].state_size for j in nb] + [spaces[j].action_size for j in nb])
        K = np.empty((codec.size, spaces[i].state_size))
        r = np.empty(codec.size)
        for row in range(codec.size):
            digits = codec.decode(row)
            p, rew = fn(i, digits[: len(nb)], digits[len(nb):])
            K[row] = p
            r[row] = rew
        kernels.append(K)
        rewards.append(r)
    return kernels, rewards


def tabular_mdp(
    name: str,
    graph: Graph,
    spaces: Sequence[LocalSpace],
    gamma: float,
    kernels: Sequence[np.ndarray],
    rewards: Sequence[np.ndarray],
    init_probs: Sequence[np.ndarray],
    reward_bound: float | None = None,
    own_action_only: bool = False,
    optimal_value: float | None = None,
    metadata: dict | None = None,
) -> NetworkedMdp:
    spaces = tuple(spaces)
    kernels = [np.asarray(k, dtype=np.float64) for k in kernels]
    rewards = [np.asarray(r, dtype=np.float64) for r in rewards]
    for i, (K, r) in enumerate(zip(kernels, rewards)):
        if (K < 0).any() or np.abs(K.sum(axis=1) - 1.0).max() > KERNEL_TOL:
            raise ValueError(f"agent {i}: kernel rows must be distributions")
        if (r < 0).any():
            raise ValueError(f"agent {i}: rewards must be non-negative")
    if reward_bound is None:
        reward_bound = max(float(r.max()) for r in rewards)
    codecs = []
    for i in range(graph.n):
        nb = graph.closed_neighbors(i)
        codecs.append(MixedRadixCodec([spaces[j].state_size for j in nb] + [spaces[j].action_size for j in nb]))

    def row_index(i, s_nbr, a_nbr):
        return codecs[i].encode_many(np.concatenate([np.atleast_2d(s_nbr), np.atleast_2d(a_nbr)], axis=1))

    def local_probs(i, s_nbr, a_nbr):
        return kernels[i][row_index(i, s_nbr, a_nbr)]

    def local_reward(i, s_nbr, a_nbr):
        return rewards[i][row_index(i, s_nbr, a_nbr)]

    return NetworkedMdp(
        name=name,
        graph=graph,
        spaces=spaces,
        gamma=float(gamma),
        reward_bound=float(reward_bound),
        init_probs=tuple(np.asarray(p, dtype=np.float64) for p in init_probs),
        local_probs=local_probs,
        local_reward=local_reward,
        simulator=TabularSimulator(graph, spaces, kernels, rewards),
        own_action_only=own_action_only,
        optimal_value=optimal_value,
        metadata=dict(metadata or {}),
    )


# ---------------------------------------------------------------------------
# sampling API


def sample_step(mdp: NetworkedMdp, s, a, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """One joint transition; rewards are those of the pre-transition ``(s, a)``."""
    s = np.asarray(s, dtype=np.int64)
    a = np.asarray(a, dtype=np.int64)
    _check_joint(mdp, s, a)
    u = rng.random((mdp.n, mdp.simulator.uniforms_per_agent))
    return mdp.simulator.step(s, a, u)


def _check_joint(mdp: NetworkedMdp, s: np.ndarray, a: np.ndarray) -> None:
    if s.shape != (mdp.n,) or a.shape != (mdp.n,):
        raise ValueError(f"state and action must have length {mdp.n}")
    if (s < 0).any() or (s >= np.array(mdp.state_sizes)).any():
        raise ValueError(f"state {s.tolist()} outside the local state spaces")
    if (a < 0).any() or (a >= np.array(mdp.action_sizes)).any():
        raise ValueError(f"action {a.tolist()} outside the local action spaces")


def sample_initial_states(mdp: NetworkedMdp, u: np.ndarray) -> np.ndarray:
    """Map uniforms of shape ``(E, n)`` to initial states drawn from ``pi_0``."""
    s0 = np.empty(u.shape, dtype=np.int64)
    for i, p in enumerate(mdp.init_probs):
        c = np.cumsum(p)
        c[-1] = 1.0
        s0[:, i] = np.minimum(np.searchsorted(c, u[:, i], side="right"), len(p) - 1)
    return s0


def simulate(
    mdp: NetworkedMdp,
    policy: LocalizedPolicyTable,
    episodes: int,
    horizon: int,
    seed: rngmod.SeedKey,
    s0: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batch of independent episodes with ``horizon`` steps each.

    Returns states, actions and rewards of shape ``(episodes, horizon, n)``.
    """
    n = mdp.n
    if s0 is None:
        s0 = sample_initial_states(mdp, rngmod.agent_uniforms(seed, rngmod.INIT, n, (episodes,)))
    else:
        s0 = np.broadcast_to(np.asarray(s0, dtype=np.int64), (episodes, n)).copy()
    u_act = rngmod.agent_uniforms(seed, rngmod.ACTION, n, (episodes, horizon))
    k = mdp.simulator.uniforms_per_agent
    u_trans = rngmod.agent_uniforms(seed, rngmod.TRANSITION, n, (episodes, horizon), (k,))
    a_cum, a_sizes = policy.cumulative_table()
    return mdp.simulator.run(s0, a_cum, a_sizes, u_act, u_trans)


def rollout(mdp: NetworkedMdp, policy: LocalizedPolicyTable, horizon: int, seed: rngmod.SeedKey) -> Trajectory:
    """Trajectory ``(s(t), a(t), r(t))`` for ``t = 0..horizon`` with ``s(0) ~ pi_0``."""
    if horizon < 0:
        raise ValueError(f"horizon must be non-negative, got {horizon}")
    if policy.shapes != mdp.policy_shapes():
        raise ValueError("policy shapes do not match the MDP's local spaces")
    S, A, R = simulate(mdp, policy, 1, horizon + 1, seed)
    return Trajectory(states=S[0], actions=A[0], rewards=R[0], seed=rngmod.derive(seed))
