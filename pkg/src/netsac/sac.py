"""Scalable actor-critic: truncated-Q TD critic and kappa-hop policy-gradient actor.

Each outer iteration ``m`` samples one trajectory under the current policy,
runs a tabular TD(0) critic per agent on the truncated state-action space
``(s_{N_i^kappa}, a_{N_i^kappa})``, and then takes one gradient-ascent step on
every agent's logits using the same trajectory.

Truncated tables are stored sparsely: only configurations that the
trajectory visits can ever become non-zero, so a table keeps the sorted flat
indices of those configurations and their values.  Everything else reads 0.
This keeps kappa >= 1 workable on graphs whose neighborhoods span billions
of configurations.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numba
import numpy as np

from . import rng as rngmod
from .codec import MixedRadixCodec
from .graph import khop_neighborhood
from .mdp import NetworkedMdp, Trajectory, rollout
from .policy import LocalizedPolicyTable, actor_step_size, gradient_ascent_step

SCORE_NORM = math.sqrt(2.0)  # bound on ||e_a - zeta(.|s)||
BOUND_SLACK = 1e-9
DENSE_LIMIT = 10**7


@dataclass(frozen=True)
class CriticSchedule:
    """Step sizes ``alpha_t = h / (t + t0)`` for an inner loop of length ``T``."""

    h: float = 50.0
    t0: float = 1000.0
    T: int = 10_000

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")
        if not self.t0 >= 1:
            raise ValueError(f"t0 must be at least 1, got {self.t0}")
        if self.h > self.t0:
            raise ValueError(f"h={self.h} > t0={self.t0} would give alpha_0 > 1")
        if int(self.T) != self.T or self.T < 0:
            raise ValueError(f"T must be a non-negative integer, got {self.T}")
        object.__setattr__(self, "T", int(self.T))

    def alpha(self, t: int) -> float:
        return self.h / (t + self.t0)


@dataclass(frozen=True)
class ActorSchedule:
    """Actor step ``eta_m = eta / sqrt(m + 1)`` over ``M`` outer iterations."""

    eta: float = 1.0
    M: int = 500

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if int(self.M) != self.M or self.M < 0:
            raise ValueError(f"M must be a non-negative integer, got {self.M}")
        object.__setattr__(self, "M", int(self.M))

    def step(self, m: int) -> float:
        return actor_step_size(self.eta, m)


@dataclass(frozen=True)
class NeighborhoodLayout:
    """Sorted ``N_i^kappa`` and the codec addressing ``(s_{N_i^kappa}, a_{N_i^kappa})``."""

    agent: int
    kappa: int
    members: tuple[int, ...]
    codec: MixedRadixCodec

    @classmethod
    def build(cls, mdp: NetworkedMdp, i: int, kappa: int) -> NeighborhoodLayout:
        members = khop_neighborhood(mdp.graph, i, kappa).members
        radices = [mdp.spaces[j].state_size for j in members] + [mdp.spaces[j].action_size for j in members]
        return cls(i, kappa, tuple(members), MixedRadixCodec(radices))

    def encode(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """Flat indices for joint states/actions of shape ``(B, n)``."""
        cols = list(self.members)
        if not self.codec.fits_int64:
            return self.codec.encode_many(np.concatenate([states[:, cols], actions[:, cols]], axis=1))
        k = len(cols)
        mult = np.asarray(self.codec.multipliers, dtype=np.int64)
        out = np.empty(states.shape[0], dtype=np.int64)
        _encode_members(
            np.ascontiguousarray(states, dtype=np.int64),
            np.ascontiguousarray(actions, dtype=np.int64),
            np.asarray(cols, dtype=np.int64),
            mult[:k],
            mult[k:],
            out,
        )
        return out


@numba.njit(cache=True)
def _encode_members(states, actions, members, s_mult, a_mult, out):
    for t in range(states.shape[0]):
        acc = 0
        for k in range(members.shape[0]):
            j = members[k]
            acc += states[t, j] * s_mult[k] + actions[t, j] * a_mult[k]
        out[t] = acc


@numba.njit(cache=True)
def _dense_relabel(flat, size):
    """Sorted unique values of ``flat`` and each element's rank among them."""
    rank = np.full(size, -1, dtype=np.int64)
    for v in flat:
        rank[v] = 0
    count = 0
    for v in range(size):
        if rank[v] == 0:
            rank[v] = count
            count += 1
    keys = np.empty(count, dtype=np.int64)
    pos = np.empty(flat.shape[0], dtype=np.int64)
    for t in range(flat.shape[0]):
        pos[t] = rank[flat[t]]
        keys[pos[t]] = flat[t]
    return keys, pos


def _unique(flat: np.ndarray, size: int) -> tuple[np.ndarray, np.ndarray]:
    if flat.dtype == np.int64 and size <= max(1 << 16, 8 * len(flat)):
        return _dense_relabel(flat, size)
    keys, pos = np.unique(flat, return_inverse=True)
    return keys, pos.astype(np.int64)


def layouts(mdp: NetworkedMdp, kappa: int) -> list[NeighborhoodLayout]:
    if kappa < 0:
        raise ValueError(f"kappa must be non-negative, got {kappa}")
    return [NeighborhoodLayout.build(mdp, i, kappa) for i in range(mdp.n)]


class TruncatedQTable:
    """Sparse ``Q_hat_i`` over ``(s_{N_i^kappa}, a_{N_i^kappa})``; missing entries are 0."""

    def __init__(self, layout: NeighborhoodLayout, keys: np.ndarray | None = None, values: np.ndarray | None = None):
        self.layout = layout
        if keys is None:
            keys = np.zeros(0, dtype=np.int64 if layout.codec.fits_int64 else object)
            values = np.zeros(0)
        if len(keys) != len(values):
            raise ValueError("keys and values must have equal length")
        self.keys = keys
        self.values = np.asarray(values, dtype=np.float64)

    @classmethod
    def zeros(cls, mdp: NetworkedMdp, i: int, kappa: int) -> TruncatedQTable:
        return cls(NeighborhoodLayout.build(mdp, i, kappa))

    @property
    def kappa(self) -> int:
        return self.layout.kappa

    @property
    def size(self) -> int:
        """Size of the full index space, stored or not."""
        return self.layout.codec.size

    def flat_index(self, z) -> int:
        """Accept a flat index or a pair ``(s_{N_i^kappa}, a_{N_i^kappa})``."""
        if isinstance(z, tuple) and len(z) == 2 and not isinstance(z[0], (int, np.integer)):
            z = self.layout.codec.encode(list(z[0]) + list(z[1]))
        z = int(z)
        if not 0 <= z < self.size:
            raise IndexError(f"entry {z} outside table of size {self.size}")
        return z

    def _position(self, z: int) -> int | None:
        pos = int(np.searchsorted(self.keys, z))
        if pos < len(self.keys) and self.keys[pos] == z:
            return pos
        return None

    def __getitem__(self, z) -> float:
        pos = self._position(self.flat_index(z))
        return 0.0 if pos is None else float(self.values[pos])

    def lookup(self, flat: np.ndarray) -> np.ndarray:
        flat = np.asarray(flat)
        out = np.zeros(flat.shape)
        if len(self.keys) == 0:
            return out
        pos = np.minimum(np.searchsorted(self.keys, flat), len(self.keys) - 1)
        hit = self.keys[pos] == flat
        out[hit] = self.values[pos[hit]]
        return out

    def with_entry(self, z, value: float) -> TruncatedQTable:
        z = self.flat_index(z)
        pos = self._position(z)
        if pos is not None:
            values = self.values.copy()
            values[pos] = value
            return TruncatedQTable(self.layout, self.keys, values)
        at = int(np.searchsorted(self.keys, z))
        keys = np.insert(self.keys, at, z)
        if keys.dtype == object:
            keys[at] = z
        return TruncatedQTable(self.layout, keys, np.insert(self.values, at, value))

    def dense(self) -> np.ndarray:
        if self.size > DENSE_LIMIT:
            raise ValueError(f"table of size {self.size} is too large to materialize")
        out = np.zeros(self.size)
        out[self.keys.astype(np.int64)] = self.values
        return out

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max()) if len(self.values) else 0.0

    def __repr__(self) -> str:
        return f"TruncatedQTable(agent={self.layout.agent}, kappa={self.kappa}, stored={len(self.keys)}/{self.size})"


def critic_td_step(table: TruncatedQTable, z_prev, z_next, r_prev: float, alpha: float, gamma: float) -> TruncatedQTable:
    """One TD(0) update of the ``z_prev`` entry towards ``r_prev + gamma * Q(z_next)``."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    target = r_prev + gamma * table[z_next]
    return table.with_entry(z_prev, (1.0 - alpha) * table[z_prev] + alpha * target)


@numba.njit(cache=True)
def _td_sweep(idx, rewards, q, h, t0, gamma):
    for t in range(1, idx.shape[0]):
        alpha = h / (t - 1 + t0)
        zp = idx[t - 1]
        q[zp] = (1.0 - alpha) * q[zp] + alpha * (rewards[t - 1] + gamma * q[idx[t]])


@dataclass(frozen=True, eq=False)
class CriticResult:
    tables: list[TruncatedQTable]
    trajectory: Trajectory
    # per agent, position of z_i(t) inside tables[i].keys for every t
    positions: list[np.ndarray] = field(repr=False)


def fit_critic(
    mdp: NetworkedMdp, trajectory: Trajectory, kappa: int, schedule: CriticSchedule, layout: Sequence[NeighborhoodLayout] | None = None
) -> CriticResult:
    """Run the TD sweep for every agent along an existing trajectory."""
    layout = layouts(mdp, kappa) if layout is None else layout
    tables, positions = [], []
    bound = mdp.reward_bound / (1.0 - mdp.gamma)
    for i, lay in enumerate(layout):
        flat = lay.encode(trajectory.states, trajectory.actions)
        keys, pos = _unique(flat, lay.codec.size)
        q = np.zeros(len(keys))
        _td_sweep(pos, np.ascontiguousarray(trajectory.rewards[:, i]), q, float(schedule.h), float(schedule.t0), mdp.gamma)
        if len(q) and (q.min() < -BOUND_SLACK or q.max() > bound + BOUND_SLACK):
            raise RuntimeError(f"agent {i}: critic left [0, {bound}] (min {q.min()}, max {q.max()})")
        tables.append(TruncatedQTable(lay, keys, q))
        positions.append(pos)
    return CriticResult(tables, trajectory, positions)


def run_critic(
    mdp: NetworkedMdp, policy: LocalizedPolicyTable, kappa: int, schedule: CriticSchedule, seed: rngmod.SeedKey
) -> tuple[list[TruncatedQTable], Trajectory]:
    """Sample ``T`` steps under ``policy`` and fit every agent's truncated Q."""
    traj = rollout(mdp, policy, schedule.T, seed)
    res = fit_critic(mdp, traj, kappa, schedule)
    return res.tables, traj


def gradient_bound(mdp: NetworkedMdp) -> float:
    """``r_bar * L / (1 - gamma)^2`` with ``L = sqrt(2)``."""
    return mdp.reward_bound * SCORE_NORM / (1.0 - mdp.gamma) ** 2


def actor_gradient(
    trajectory: Trajectory,
    tables: Sequence[TruncatedQTable],
    policy: LocalizedPolicyTable,
    kappa: int,
    gamma: float,
    reward_bound: float | None = None,
    positions: Sequence[np.ndarray] | None = None,
) -> list[np.ndarray]:
    """Per-agent gradient estimates built from the truncated critics.

    ``g_i = sum_t gamma^t (1/n) sum_{j in N_i^kappa} Q_hat_j(z_j(t)) * score_i(t)``.
    When ``reward_bound`` is given the norm bound is enforced.  ``positions``
    (from :func:`fit_critic`) skips re-encoding the trajectory.
    """
    n = policy.n
    if len(tables) != n:
        raise ValueError(f"expected {n} tables, got {len(tables)}")
    if trajectory.states.shape[1] != n:
        raise ValueError("trajectory and policy disagree on the number of agents")
    for tab in tables:
        if tab.kappa != kappa:
            raise ValueError(f"table built for kappa={tab.kappa}, not {kappa}")
    disc = gamma ** np.arange(len(trajectory)) / n
    # terms whose discount underflowed to 0.0 add exact zeros; skip them
    steps = int(np.count_nonzero(disc))
    disc = disc[:steps]
    states, actions = trajectory.states[:steps], trajectory.actions[:steps]
    qvals = np.empty((steps, n))
    for j, tab in enumerate(tables):
        if positions is not None:
            qvals[:, j] = tab.values[positions[j][:steps]]
        else:
            qvals[:, j] = tab.lookup(tab.layout.encode(states, actions))
    grads = []
    for i in range(n):
        members = list(tables[i].layout.members)
        w = disc * qvals[:, members].sum(axis=1)
        grads.append(_score_weighted_sum(policy, i, states[:, i], actions[:, i], w))
    if reward_bound is not None:
        bound = reward_bound * SCORE_NORM / (1.0 - gamma) ** 2
        for i, g in enumerate(grads):
            norm = float(np.linalg.norm(g))
            if norm > bound * (1 + BOUND_SLACK):
                raise RuntimeError(f"agent {i}: gradient norm {norm} exceeds bound {bound}")
    return grads


def _score_weighted_sum(policy: LocalizedPolicyTable, i: int, s: np.ndarray, a: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``sum_t w_t (e_{a_t} - zeta_i(.|s_t))`` placed in row ``s_t``."""
    probs = policy.probs(i)
    n_s, n_a = probs.shape
    g = np.bincount(s * n_a + a, weights=w, minlength=n_s * n_a).reshape(n_s, n_a)
    g -= probs * np.bincount(s, weights=w, minlength=probs.shape[0])[:, None]
    return g


@dataclass
class IterationMetrics:
    m: int
    eta_m: float
    eval_J: float
    wall_ms: float
    q_sup: list[float]


@dataclass
class TrainResult:
    policy: LocalizedPolicyTable
    history: list[IterationMetrics]


Evaluator = Callable[[LocalizedPolicyTable], float]


def train(
    mdp: NetworkedMdp,
    kappa: int,
    critic: CriticSchedule,
    actor: ActorSchedule,
    seed: rngmod.SeedKey,
    evaluate: Optional[Evaluator] = None,
    evaluate_every: int = 1,
    callbacks: Sequence[Callable[[IterationMetrics, LocalizedPolicyTable], None]] = (),
    initial_policy: LocalizedPolicyTable | None = None,
) -> TrainResult:
    """Run ``M`` outer iterations starting from the uniform policy.

    Iteration ``m`` draws its trajectory from the ``(seed, TRAIN, m)`` stream.
    ``eval_J`` in the metrics row for ``m`` is the value of the policy after
    that iteration's update (NaN when not evaluated).
    """
    policy = mdp.uniform_policy() if initial_policy is None else initial_policy
    lay = layouts(mdp, kappa)
    history: list[IterationMetrics] = []
    for m in range(actor.M):
        start = time.perf_counter()
        traj = rollout(mdp, policy, critic.T, rngmod.derive(seed, rngmod.TRAIN, m))
        res = fit_critic(mdp, traj, kappa, critic, lay)
        grads = actor_gradient(traj, res.tables, policy, kappa, mdp.gamma, mdp.reward_bound, res.positions)
        eta_m = actor.step(m)
        policy = gradient_ascent_step(policy, grads, eta_m)
        value = math.nan
        if evaluate is not None and ((m + 1) % evaluate_every == 0 or m + 1 == actor.M):
            value = float(evaluate(policy))
        row = IterationMetrics(m, eta_m, value, 1000.0 * (time.perf_counter() - start), [t.sup_norm() for t in res.tables])
        history.append(row)
        for cb in callbacks:
            cb(row, policy)
    return TrainResult(policy, history)


def write_metrics_csv(path: str | Path, history: Sequence[IterationMetrics]) -> None:
    """One row per outer iteration: m, eta_m, eval_J, wall_ms, q_sup_<i>."""
    n = len(history[0].q_sup) if history else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "eta_m", "eval_J", "wall_ms"] + [f"q_sup_{i}" for i in range(n)])
        for row in history:
            w.writerow([row.m, repr(row.eta_m), repr(row.eval_J), f"{row.wall_ms:.3f}"] + [repr(q) for q in row.q_sup])
