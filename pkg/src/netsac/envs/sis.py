"""SIS epidemic on a graph with per-node control actions.

State 0 is susceptible, 1 is infected.  The raw reward
``1{susceptible} - c_i(a_i)`` is shifted by ``max_a c_i(a)`` and divided by
``1 + max c_i - min c_i`` so that it lies in ``[0, 1]``; the change is affine
and preserves the argmax.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..graph import Graph
from ..mdp import LocalSpace, NetworkedMdp, tabular_mdp, tabulate

SUSCEPTIBLE, INFECTED = 0, 1


@dataclass(frozen=True, eq=False)
class SisEnv:
    graph: Graph
    gamma: float
    delta: np.ndarray  # (n,) recovery rates
    beta: np.ndarray  # (n, |A|) transmission rate per action
    cost: np.ndarray  # (n, |A|) control cost per action
    init_infected: np.ndarray  # (n,)

    @classmethod
    def create(
        cls,
        graph: Graph,
        gamma: float,
        delta: Sequence[float] | float,
        beta: Sequence[Sequence[float]] | Sequence[float],
        cost: Sequence[Sequence[float]] | Sequence[float],
        init_infected: Sequence[float] | float = 0.5,
    ) -> SisEnv:
        """``beta`` and ``cost`` hold one value per action, shared or per node."""
        n = graph.n
        delta = np.broadcast_to(np.asarray(delta, dtype=float), (n,)).copy()
        beta = np.asarray(beta, dtype=float)
        cost = np.asarray(cost, dtype=float)
        beta = np.broadcast_to(beta, (n, beta.shape[-1])).copy()
        cost = np.broadcast_to(cost, (n, cost.shape[-1])).copy()
        if beta.shape != cost.shape:
            raise ValueError("beta and cost must cover the same action sets")
        if not ((delta > 0) & (delta <= 1)).all():
            raise ValueError("recovery rates must lie in (0, 1]")
        if not ((beta > 0) & (beta < 1)).all():
            raise ValueError("transmission rates must lie in (0, 1)")
        init = np.broadcast_to(np.asarray(init_infected, dtype=float), (n,)).copy()
        return cls(graph, float(gamma), delta, beta, cost, init)

    @property
    def reward_shift(self) -> np.ndarray:
        return self.cost.max(axis=1)

    @property
    def reward_scale(self) -> np.ndarray:
        return 1.0 + self.cost.max(axis=1) - self.cost.min(axis=1)

    def local_probs(self, i: int, s_nbr: Sequence[int], a_i: int) -> np.ndarray:
        """``[P(susceptible), P(infected)]`` for node ``i``'s next state."""
        nb = self.graph.closed_neighbors(i)
        s_i = s_nbr[nb.index(i)]
        if s_i == SUSCEPTIBLE:
            infected = sum(1 for j, sj in zip(nb, s_nbr) if j != i and sj == INFECTED)
            p_sus = (1.0 - self.beta[i, a_i]) ** infected
        else:
            p_sus = self.delta[i]
        return np.array([p_sus, 1.0 - p_sus])

    def local_reward(self, i: int, s_i: int, a_i: int) -> float:
        raw = float(s_i == SUSCEPTIBLE) - self.cost[i, a_i]
        return (raw + self.reward_shift[i]) / self.reward_scale[i]

    def build(self) -> NetworkedMdp:
        n = self.graph.n
        spaces = tuple(LocalSpace(2, self.beta.shape[1]) for _ in range(n))

        def fn(i, s_nbr, a_nbr):
            k = self.graph.closed_neighbors(i).index(i)
            return self.local_probs(i, s_nbr, a_nbr[k]), self.local_reward(i, s_nbr[k], a_nbr[k])

        kernels, rewards = tabulate(self.graph, spaces, fn)
        return tabular_mdp(
            name=f"sis{n}",
            graph=self.graph,
            spaces=spaces,
            gamma=self.gamma,
            kernels=kernels,
            rewards=rewards,
            init_probs=[np.array([1.0 - q, q]) for q in self.init_infected],
            reward_bound=1.0,
            own_action_only=True,
            metadata={"reward_shift": self.reward_shift.tolist(), "reward_scale": self.reward_scale.tolist()},
        )


def sis_transition(env: SisEnv, i: int, s_nbr: Sequence[int], a_i: int, rng: np.random.Generator) -> int:
    """Sample node ``i``'s next state."""
    p_sus = env.local_probs(i, s_nbr, a_i)[0]
    return SUSCEPTIBLE if rng.random() < p_sus else INFECTED


def sis_env(graph: Graph, gamma: float, delta, beta, cost, init_infected=0.5) -> NetworkedMdp:
    return SisEnv.create(graph, gamma, delta, beta, cost, init_infected).build()
