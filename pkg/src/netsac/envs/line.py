"""Synthetic line network with a closed-form optimum.

Only the left-most agent earns reward (1 while its state is 1) and it can only
keep state 1 if the whole chain to its right keeps taking action 1.
"""

from __future__ import annotations

import numpy as np

from ..graph import Graph
from ..mdp import LocalSpace, NetworkedMdp, tabular_mdp, tabulate

MIDDLE_KEEP_PROB = 0.8


def _line_local(n: int):
    def fn(i, s_nbr, a_nbr):
        nb = tuple(range(max(i - 1, 0), min(i + 2, n)))
        s = dict(zip(nb, s_nbr))
        a = dict(zip(nb, a_nbr))
        if i == 0:
            p_one = float(s[1] == 1)
        elif i == n - 1:
            p_one = float(a[i] == 1)
        elif a[i] == 1:
            p_one = 1.0 if s[i + 1] == 1 else MIDDLE_KEEP_PROB
        else:
            p_one = 0.0
        reward = float(i == 0 and s[0] == 1)
        return np.array([1.0 - p_one, p_one]), reward

    return fn


def line_env(n: int, gamma: float) -> NetworkedMdp:
    """Line of ``n >= 2`` binary agents starting from the all-ones state."""
    if n < 2:
        raise ValueError(f"line environment needs n >= 2, got {n}")
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    graph = Graph.line(n)
    spaces = tuple(LocalSpace(2, 2) for _ in range(n))
    kernels, rewards = tabulate(graph, spaces, _line_local(n))
    return tabular_mdp(
        name=f"line{n}",
        graph=graph,
        spaces=spaces,
        gamma=gamma,
        kernels=kernels,
        rewards=rewards,
        init_probs=[np.array([0.0, 1.0])] * n,
        reward_bound=1.0,
        own_action_only=True,
        optimal_value=(1.0 / n) / (1.0 - gamma),
        metadata={"n": n},
    )


def all_ones_policy_probs(n: int) -> list[np.ndarray]:
    return [np.array([[0.0, 1.0], [0.0, 1.0]])] * n
