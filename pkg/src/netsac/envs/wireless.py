"""Multi-access wireless grid with deadline-constrained packet queues.

Users sit on the blocks of a ``rows x cols`` grid and may send to the access
points on the four corners of their block.  Two users conflict when they
share an access point.

Local state: bit ``l-1`` of the integer state is set when the user holds a
packet with ``l`` steps of deadline left (bit 0 is the earliest packet).
Local action 0 is ``null``; action ``k >= 1`` sends the earliest packet to
``Y_i[k-1]``.

Simulated rewards are the realized success indicators; the exact reward
function used by the oracle is their conditional mean ``q_k`` on an
uncontended send.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .. import rng as rngmod
from ..graph import Graph
from ..mdp import LocalSpace, NetworkedMdp, Simulator, _sample_actions_jit
from ..policy import LocalizedPolicyTable

NULL = 0


@dataclass(frozen=True, eq=False)
class WirelessGridEnv:
    rows: int
    cols: int
    gamma: float
    deadlines: np.ndarray  # (n,) d_i
    arrival: np.ndarray  # (n,) p_i
    success: np.ndarray  # (n_ap,) q_k
    access: tuple[tuple[int, ...], ...]  # Y_i as access-point ids
    blocks: tuple[tuple[int, int], ...]  # block of each user

    @classmethod
    def create(
        cls,
        rows: int,
        cols: int,
        gamma: float,
        seed: rngmod.SeedKey,
        deadline: int = 2,
        random_placement: bool = False,
    ) -> WirelessGridEnv:
        """Grid with ``p_i`` and ``q_k`` drawn uniformly from ``[0, 1]``.

        With ``random_placement`` the ``rows * cols`` users are assigned to
        uniformly random blocks (with replacement) instead of one per block.
        """
        if rows < 1 or cols < 1:
            raise ValueError("grid needs at least one block")
        n = rows * cols
        gen = rngmod.stream(seed, rngmod.ENV)
        arrival = gen.random(n)
        success = gen.random((rows + 1) * (cols + 1))
        if random_placement:
            flat = gen.integers(0, n, size=n)
            blocks = tuple((int(b) // cols, int(b) % cols) for b in flat)
        else:
            blocks = tuple((r, c) for r in range(rows) for c in range(cols))
        return cls.from_parameters(rows, cols, gamma, [deadline] * n, arrival, success, blocks)

    @classmethod
    def from_parameters(
        cls,
        rows: int,
        cols: int,
        gamma: float,
        deadlines: Sequence[int],
        arrival: Sequence[float],
        success: Sequence[float],
        blocks: Sequence[tuple[int, int]],
    ) -> WirelessGridEnv:
        arrival = np.asarray(arrival, dtype=float)
        success = np.asarray(success, dtype=float)
        deadlines = np.asarray(deadlines, dtype=np.int64)
        if not ((arrival >= 0) & (arrival <= 1)).all() or not ((success >= 0) & (success <= 1)).all():
            raise ValueError("arrival and success probabilities must lie in [0, 1]")
        if (deadlines < 1).any():
            raise ValueError("deadlines must be positive")
        if success.shape != ((rows + 1) * (cols + 1),):
            raise ValueError("need one success probability per access point")
        w = cols + 1
        access = tuple((r * w + c, r * w + c + 1, (r + 1) * w + c, (r + 1) * w + c + 1) for r, c in blocks)
        return cls(rows, cols, float(gamma), deadlines, arrival, success, access, tuple(blocks))

    @property
    def n(self) -> int:
        return len(self.access)

    @property
    def n_access_points(self) -> int:
        return len(self.success)

    def conflict_graph(self) -> Graph:
        sets = [set(y) for y in self.access]
        edges = [(i, j) for i in range(self.n) for j in range(i + 1, self.n) if sets[i] & sets[j]]
        return Graph(self.n, edges)

    def sharers(self) -> np.ndarray:
        """Number of users that can reach each access point."""
        counts = np.zeros(self.n_access_points, dtype=np.int64)
        for y in self.access:
            counts[list(y)] += 1
        return counts

    def spaces(self) -> tuple[LocalSpace, ...]:
        return tuple(LocalSpace(2 ** int(d), len(y) + 1) for d, y in zip(self.deadlines, self.access))

    def _target(self, j: int, a_j: np.ndarray) -> np.ndarray:
        """Access point targeted by action ``a_j`` of user ``j`` (-1 for null)."""
        table = np.array((-1,) + self.access[j])
        return table[a_j]

    def success_prob(self, i: int, s_nbr: np.ndarray, a_nbr: np.ndarray) -> np.ndarray:
        """Probability that user ``i``'s packet goes through, per batch row."""
        nb = self.conflict_graph_neighbors(i)
        k = nb.index(i)
        s_i, a_i = s_nbr[:, k], a_nbr[:, k]
        target = self._target(i, a_i)
        sending = (target >= 0) & (s_i != 0)
        conflict = np.zeros(len(s_i), dtype=bool)
        for col, j in enumerate(nb):
            if j == i:
                continue
            conflict |= (s_nbr[:, col] != 0) & (self._target(j, a_nbr[:, col]) == target)
        ok = sending & ~conflict
        return np.where(ok, self.success[np.maximum(target, 0)], 0.0)

    def conflict_graph_neighbors(self, i: int) -> tuple[int, ...]:
        return self._closed[i]

    def __post_init__(self):
        g = self.conflict_graph()
        object.__setattr__(self, "_graph", g)
        object.__setattr__(self, "_closed", tuple(g.closed_neighbors(i) for i in range(g.n)))

    def local_probs(self, i: int, s_nbr: np.ndarray, a_nbr: np.ndarray) -> np.ndarray:
        s_nbr = np.atleast_2d(np.asarray(s_nbr, dtype=np.int64))
        a_nbr = np.atleast_2d(np.asarray(a_nbr, dtype=np.int64))
        k = self._closed[i].index(i)
        d = int(self.deadlines[i])
        p = self.arrival[i]
        s_i = s_nbr[:, k]
        q = self.success_prob(i, s_nbr, a_nbr)
        top = 1 << (d - 1)
        out = np.zeros((len(s_i), 1 << d))
        rows = np.arange(len(s_i))
        kept = s_i >> 1
        sent = (s_i & (s_i - 1)) >> 1
        np.add.at(out, (rows, kept), (1 - q) * (1 - p))
        np.add.at(out, (rows, kept | top), (1 - q) * p)
        np.add.at(out, (rows, sent), q * (1 - p))
        np.add.at(out, (rows, sent | top), q * p)
        return out

    def local_reward(self, i: int, s_nbr: np.ndarray, a_nbr: np.ndarray) -> np.ndarray:
        return self.success_prob(i, np.atleast_2d(s_nbr), np.atleast_2d(a_nbr))

    def build(self) -> NetworkedMdp:
        spaces = self.spaces()
        return NetworkedMdp(
            name=f"wireless{self.rows}x{self.cols}",
            graph=self._graph,
            spaces=spaces,
            gamma=self.gamma,
            reward_bound=1.0,
            init_probs=tuple(np.full(sp.state_size, 1.0 / sp.state_size) for sp in spaces),
            local_probs=self.local_probs,
            local_reward=self.local_reward,
            simulator=WirelessSimulator(self),
            own_action_only=False,
            metadata={
                "rows": self.rows,
                "cols": self.cols,
                "arrival": self.arrival.tolist(),
                "success": self.success.tolist(),
                "blocks": [list(b) for b in self.blocks],
            },
        )


def wireless_transition(
    env: WirelessGridEnv, i: int, s_nbr: Sequence[int], a_nbr: Sequence[int], rng: np.random.Generator
) -> tuple[int, float]:
    """Sample user ``i``'s next queue state and its reward.

    ``s_nbr``/``a_nbr`` are ordered like the conflict-graph neighborhood
    ``N_i`` (sorted, including ``i``).
    """
    nb = env.conflict_graph_neighbors(i)
    if len(s_nbr) != len(nb) or len(a_nbr) != len(nb):
        raise ValueError(f"user {i} has {len(nb)} conflict neighbors including itself")
    k = nb.index(i)
    s_i, a_i = int(s_nbr[k]), int(a_nbr[k])
    if not 0 <= a_i <= len(env.access[i]):
        raise ValueError(f"action {a_i} not in null + Y_{i}")
    d = int(env.deadlines[i])
    reward = 0.0
    if a_i != NULL and s_i != 0:
        target = env.access[i][a_i - 1]
        contended = any(
            j != i and s_j != 0 and a_j != NULL and env.access[j][a_j - 1] == target
            for j, s_j, a_j in zip(nb, s_nbr, a_nbr)
        )
        if not contended and rng.random() < env.success[target]:
            s_i &= s_i - 1
            reward = 1.0
    arrived = rng.random() < env.arrival[i]
    return (s_i >> 1) | (int(arrived) << (d - 1)), reward


def aloha_policy(env: WirelessGridEnv, send_prob: Sequence[float] | float) -> LocalizedPolicyTable:
    """Localized ALOHA: with non-empty queue send w.p. ``send_prob`` to ``y_k``
    chosen proportionally to ``q_k / (#users sharing y_k)``."""
    send = np.broadcast_to(np.asarray(send_prob, dtype=float), (env.n,))
    if ((send < 0) | (send > 1)).any():
        raise ValueError("send probabilities must lie in [0, 1]")
    sharers = env.sharers()
    tables = []
    for i, y in enumerate(env.access):
        w = env.success[list(y)] / sharers[list(y)]
        w = w / w.sum() if w.sum() > 0 else np.full(len(y), 1.0 / len(y))
        table = np.zeros((2 ** int(env.deadlines[i]), len(y) + 1))
        table[0, NULL] = 1.0
        table[1:, NULL] = 1.0 - send[i]
        table[1:, 1:] = send[i] * w
        tables.append(table)
    return LocalizedPolicyTable.from_probs(tables)


# ---------------------------------------------------------------------------
# jitted sampler


@numba.njit(cache=True)
def _wireless_step(access, n_access, deadlines, arrival, success, nbr, nbr_len, s, a, u, s_out, r_out):
    n = s.shape[0]
    for i in range(n):
        x = s[i]
        r_out[i] = 0.0
        if a[i] != 0 and x != 0:
            target = access[i, a[i] - 1]
            contended = False
            for k in range(nbr_len[i]):
                j = nbr[i, k]
                if s[j] != 0 and a[j] != 0 and access[j, a[j] - 1] == target:
                    contended = True
                    break
            if not contended and u[i, 0] < success[target]:
                x = x & (x - 1)
                r_out[i] = 1.0
        x = x >> 1
        if u[i, 1] < arrival[i]:
            x = x | (1 << (deadlines[i] - 1))
        s_out[i] = x


@numba.njit(cache=True)
def _wireless_run(access, n_access, deadlines, arrival, success, nbr, nbr_len, s0, a_cum, a_sizes, u_act, u_trans):
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
            _wireless_step(access, n_access, deadlines, arrival, success, nbr, nbr_len, s, a, u_trans[e, t], s_next, r)
            S[e, t] = s
            A[e, t] = a
            R[e, t] = r
            s[:] = s_next
    return S, A, R


class WirelessSimulator(Simulator):
    # uniforms: [0] transmission success, [1] packet arrival
    uniforms_per_agent = 2

    def __init__(self, env: WirelessGridEnv):
        n = env.n
        g = env.conflict_graph()
        width = max(1, max(len(g.neighbors(i)) for i in range(n)))
        self.access = np.full((n, 4), -1, dtype=np.int64)
        self.n_access = np.array([len(y) for y in env.access], dtype=np.int64)
        for i, y in enumerate(env.access):
            self.access[i, : len(y)] = y
        self.nbr = np.zeros((n, width), dtype=np.int64)
        self.nbr_len = np.zeros(n, dtype=np.int64)
        for i in range(n):
            nb = g.neighbors(i)
            self.nbr[i, : len(nb)] = nb
            self.nbr_len[i] = len(nb)
        self.deadlines = env.deadlines.astype(np.int64)
        self.arrival = env.arrival.astype(np.float64)
        self.success = env.success.astype(np.float64)

    def _params(self):
        return (self.access, self.n_access, self.deadlines, self.arrival, self.success, self.nbr, self.nbr_len)

    def step(self, s, a, u):
        s_out = np.empty(len(s), dtype=np.int64)
        r_out = np.empty(len(s))
        _wireless_step(*self._params(), np.asarray(s, np.int64), np.asarray(a, np.int64), np.asarray(u, np.float64), s_out, r_out)
        return s_out, r_out

    def run(self, s0, a_cum, a_sizes, u_act, u_trans):
        return _wireless_run(*self._params(), s0, a_cum, a_sizes, u_act, u_trans)


def wireless_env(rows: int, cols: int, gamma: float, seed: rngmod.SeedKey, deadline: int = 2, random_placement: bool = False) -> NetworkedMdp:
    return WirelessGridEnv.create(rows, cols, gamma, seed, deadline, random_placement).build()
