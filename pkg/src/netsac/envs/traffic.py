"""Signalized road links with turn queues.

Link ``i`` keeps one queue ``x_{i,j} in [0, S]`` per outgoing turn ``i -> j``
and one signal bit ``y_{i,j}`` per turn.  Each step, ``min(C_{i,j} y_{i,j},
x_{i,j})`` vehicles leave queue ``(i, j)`` and every vehicle arriving from an
upstream link is routed to one of ``i``'s queues with probabilities
``R_i`` (multinomial routing keeps vehicle counts integral).  Queues are then
clamped to ``[0, S]``.  Links draw their own randomness independently, as
the factorized model requires.

Rewards are ``(S * deg_i - sum_j x_{i,j}) / (S * deg_i)``: the negative queue
length shifted and scaled into ``[0, 1]``.  Links without outgoing turns
have a single state and earn 1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..codec import MixedRadixCodec
from ..graph import Graph
from ..mdp import LocalSpace, NetworkedMdp, Simulator


def _categorical(probs: np.ndarray, u: float) -> int:
    c = np.cumsum(probs)
    return min(int(np.searchsorted(c, u, side="right")), len(probs) - 1)


@dataclass(frozen=True, eq=False)
class TrafficEnv:
    n_links: int
    turns: tuple[tuple[int, int], ...]
    capacity: int  # S
    turn_capacity: tuple[np.ndarray, ...]  # distribution of C over 0..c_max, aligned with turns
    routing: tuple[np.ndarray, ...]  # per link, over its outgoing turns
    gamma: float
    init_queue: np.ndarray  # distribution of each initial queue length over 0..S

    @classmethod
    def create(
        cls,
        n_links: int,
        turns: Sequence[tuple[int, int]],
        capacity: int,
        capacity_probs: Sequence[float] | dict,
        gamma: float,
        routing: Sequence[Sequence[float]] | None = None,
        init_queue: Sequence[float] | None = None,
    ) -> TrafficEnv:
        turns = tuple(sorted({(int(i), int(j)) for i, j in turns}))
        if any(i == j or not (0 <= i < n_links and 0 <= j < n_links) for i, j in turns):
            raise ValueError("turns must connect distinct links inside 0..n_links-1")
        if capacity < 1:
            raise ValueError("queue cap S must be at least 1")
        if isinstance(capacity_probs, dict):
            caps = tuple(np.asarray(capacity_probs[t], dtype=float) for t in turns)
        else:
            caps = tuple(np.asarray(capacity_probs, dtype=float) for _ in turns)
        for c in caps:
            if (c < 0).any() or abs(c.sum() - 1.0) > 1e-12:
                raise ValueError("capacity distributions must be probability vectors")
        outs = [[j for (i, j) in turns if i == link] for link in range(n_links)]
        if routing is None:
            routing = [np.full(len(o), 1.0 / len(o)) if o else np.zeros(0) for o in outs]
        routing = tuple(np.asarray(r, dtype=float) for r in routing)
        for link, (r, o) in enumerate(zip(routing, outs)):
            if len(r) != len(o) or (o and abs(r.sum() - 1.0) > 1e-12):
                raise ValueError(f"link {link}: routing must be a distribution over its {len(o)} turns")
        if init_queue is None:
            init_queue = np.full(capacity + 1, 1.0 / (capacity + 1))
        return cls(n_links, turns, int(capacity), caps, routing, float(gamma), np.asarray(init_queue, dtype=float))

    @classmethod
    def ring(cls, n_links: int, capacity: int, capacity_probs: Sequence[float], gamma: float) -> TrafficEnv:
        """Circular road: link ``i`` turns into ``i+1`` and ``i+2`` (mod n)."""
        if n_links < 3:
            raise ValueError("ring traffic network needs at least 3 links")
        turns = [(i, (i + 1) % n_links) for i in range(n_links)] + [(i, (i + 2) % n_links) for i in range(n_links)]
        return cls.create(n_links, turns, capacity, capacity_probs, gamma)

    def __post_init__(self):
        outs = tuple(tuple(j for (i, j) in self.turns if i == link) for link in range(self.n_links))
        ins = tuple(tuple(i for (i, j) in self.turns if j == link) for link in range(self.n_links))
        graph = Graph(self.n_links, self.turns)
        object.__setattr__(self, "out_links", outs)
        object.__setattr__(self, "in_links", ins)
        object.__setattr__(self, "graph", graph)
        object.__setattr__(self, "_closed", tuple(graph.closed_neighbors(i) for i in range(self.n_links)))
        object.__setattr__(self, "_cap_index", {t: k for k, t in enumerate(self.turns)})
        object.__setattr__(
            self,
            "_state_codecs",
            tuple(MixedRadixCodec([self.capacity + 1] * len(o)) for o in outs),
        )
        object.__setattr__(self, "_action_codecs", tuple(MixedRadixCodec([2] * len(o)) for o in outs))

    def spaces(self) -> tuple[LocalSpace, ...]:
        return tuple(LocalSpace(c.size, a.size) for c, a in zip(self._state_codecs, self._action_codecs))

    def queues(self, link: int, s: int) -> tuple[int, ...]:
        return self._state_codecs[link].decode(s)

    def signals(self, link: int, a: int) -> tuple[int, ...]:
        return self._action_codecs[link].decode(a)

    def encode_queues(self, link: int, x: Sequence[int]) -> int:
        return self._state_codecs[link].encode(x)

    def _upstream(self, i: int, s_nbr: Sequence[int], a_nbr: Sequence[int]):
        """``(x_{k,i}, y_{k,i}, C_{k,i} distribution)`` for every ``k -> i``."""
        nb = self._closed[i]
        out = []
        for k in self.in_links[i]:
            col = nb.index(k)
            pos = self.out_links[k].index(i)
            out.append(
                (
                    self.queues(k, s_nbr[col])[pos],
                    self.signals(k, a_nbr[col])[pos],
                    self.turn_capacity[self._cap_index[(k, i)]],
                )
            )
        return out

    def reward_of(self, i: int, s_i: int) -> float:
        deg = len(self.out_links[i])
        if deg == 0:
            return 1.0
        return (self.capacity * deg - sum(self.queues(i, s_i))) / (self.capacity * deg)

    # exact -----------------------------------------------------------------

    def next_state_probs(self, i: int, s_nbr: Sequence[int], a_nbr: Sequence[int]) -> np.ndarray:
        nb = self._closed[i]
        me = nb.index(i)
        size = self._state_codecs[i].size
        if not self.out_links[i]:
            return np.ones(1)
        x = self.queues(i, s_nbr[me])
        y = self.signals(i, a_nbr[me])
        # remaining queue after departures, independent per turn
        remaining = []
        for pos, j in enumerate(self.out_links[i]):
            dist = np.zeros(self.capacity + 1)
            for c, pc in enumerate(self.turn_capacity[self._cap_index[(i, j)]]):
                dist[x[pos] - min(c * y[pos], x[pos])] += pc
            remaining.append(dist)
        # total inflow, convolved over upstream links
        inflow = np.ones(1)
        for x_k, y_k, cap in self._upstream(i, s_nbr, a_nbr):
            d = np.zeros(x_k + 1)
            for c, pc in enumerate(cap):
                d[min(c * y_k, x_k)] += pc
            inflow = np.convolve(inflow, d)
        route = self.routing[i]
        out = np.zeros(size)
        base_states = list(itertools.product(*[range(self.capacity + 1)] * len(remaining)))
        for m, pm in enumerate(inflow):
            if pm == 0.0:
                continue
            for alloc in _compositions(m, len(route)):
                pa = pm * _multinomial_pmf(alloc, route)
                if pa == 0.0:
                    continue
                for base in base_states:
                    pb = pa * math.prod(remaining[k][b] for k, b in enumerate(base))
                    if pb == 0.0:
                        continue
                    nxt = [min(b + al, self.capacity) for b, al in zip(base, alloc)]
                    out[self.encode_queues(i, nxt)] += pb
        return out

    def local_probs(self, i: int, s_nbr: np.ndarray, a_nbr: np.ndarray) -> np.ndarray:
        s_nbr = np.atleast_2d(s_nbr)
        a_nbr = np.atleast_2d(a_nbr)
        return np.stack([self.next_state_probs(i, s, a) for s, a in zip(s_nbr, a_nbr)])

    def local_reward(self, i: int, s_nbr: np.ndarray, a_nbr: np.ndarray) -> np.ndarray:
        me = self._closed[i].index(i)
        return np.array([self.reward_of(i, s) for s in np.atleast_2d(s_nbr)[:, me]])

    # sampling --------------------------------------------------------------

    def sample_next(self, i: int, s_nbr: Sequence[int], a_nbr: Sequence[int], draw: Callable[[], float]) -> int:
        """Apply the queue update once, pulling uniforms from ``draw``."""
        if not self.out_links[i]:
            return 0
        me = self._closed[i].index(i)
        x = list(self.queues(i, s_nbr[me]))
        y = self.signals(i, a_nbr[me])
        for pos, j in enumerate(self.out_links[i]):
            c = _categorical(self.turn_capacity[self._cap_index[(i, j)]], draw())
            x[pos] -= min(c * y[pos], x[pos])
        arriving = 0
        for x_k, y_k, cap in self._upstream(i, s_nbr, a_nbr):
            arriving += min(_categorical(cap, draw()) * y_k, x_k)
        for _ in range(arriving):
            x[_categorical(self.routing[i], draw())] += 1
        return self.encode_queues(i, [min(v, self.capacity) for v in x])

    def uniforms_needed(self) -> int:
        need = 1
        for i in range(self.n_links):
            inflow = sum(min(len(self.turn_capacity[self._cap_index[(k, i)]]) - 1, self.capacity) for k in self.in_links[i])
            need = max(need, len(self.out_links[i]) + len(self.in_links[i]) + inflow)
        return need

    def build(self) -> NetworkedMdp:
        spaces = self.spaces()
        init = []
        for i, sp in enumerate(spaces):
            p = np.zeros(sp.state_size)
            codec = self._state_codecs[i]
            for s in range(sp.state_size):
                p[s] = math.prod(self.init_queue[v] for v in codec.decode(s))
            init.append(p)
        return NetworkedMdp(
            name=f"traffic{self.n_links}",
            graph=self.graph,
            spaces=spaces,
            gamma=self.gamma,
            reward_bound=1.0,
            init_probs=tuple(init),
            local_probs=self.local_probs,
            local_reward=self.local_reward,
            simulator=TrafficSimulator(self),
            own_action_only=False,
            metadata={"turns": [list(t) for t in self.turns], "capacity": self.capacity, "reward": "(S*deg - sum x)/(S*deg)"},
        )


def _compositions(m: int, parts: int):
    """All ways to split ``m`` identical vehicles over ``parts`` queues."""
    if parts == 1:
        yield (m,)
        return
    for first in range(m + 1):
        for rest in _compositions(m - first, parts - 1):
            yield (first, *rest)


def _multinomial_pmf(counts: Sequence[int], probs: np.ndarray) -> float:
    total = sum(counts)
    coef = math.factorial(total)
    for c in counts:
        coef //= math.factorial(c)
    return coef * math.prod(float(p) ** c for p, c in zip(probs, counts))


def traffic_transition(env: TrafficEnv, i: int, s_nbr: Sequence[int], a_nbr: Sequence[int], rng: np.random.Generator) -> int:
    """Sample link ``i``'s next queue state (encoded)."""
    return env.sample_next(i, s_nbr, a_nbr, rng.random)


class TrafficSimulator(Simulator):
    def __init__(self, env: TrafficEnv):
        self.env = env
        self.uniforms_per_agent = env.uniforms_needed()
        self.closed = [list(env.graph.closed_neighbors(i)) for i in range(env.n_links)]

    def step(self, s, a, u):
        env = self.env
        s_next = np.empty(len(s), dtype=np.int64)
        r = np.empty(len(s))
        for i in range(env.n_links):
            nb = self.closed[i]
            it = iter(u[i])
            s_next[i] = env.sample_next(i, [s[j] for j in nb], [a[j] for j in nb], lambda: next(it))
            r[i] = env.reward_of(i, s[i])
        return s_next, r
