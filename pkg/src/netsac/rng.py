"""Counter-based random streams keyed by (seed, ..., agent, purpose).

Every consumer of randomness asks for its own Philox substream, so results do
not depend on the order in which agents or purposes draw their numbers.
"""

from __future__ import annotations

from typing import Sequence, Union

import numpy as np

SeedKey = Union[int, Sequence[int]]

# purpose tags
INIT = 0
ACTION = 1
TRANSITION = 2
ENV = 3
EVAL = 4
TRAIN = 5
POLICY = 6


def _key(seed: SeedKey) -> tuple[int, ...]:
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(s) for s in seed)


def derive(seed: SeedKey, *keys: int) -> tuple[int, ...]:
    """Append keys to a seed, producing a child seed."""
    return _key(seed) + tuple(int(k) for k in keys)


def stream(seed: SeedKey, *keys: int) -> np.random.Generator:
    key = derive(seed, *keys)
    if any(k < 0 for k in key):
        raise ValueError(f"seed keys must be non-negative, got {key}")
    seq = np.random.SeedSequence(key[0], spawn_key=key[1:])
    return np.random.Generator(np.random.Philox(seq))


def agent_uniforms(
    seed: SeedKey, purpose: int, n_agents: int, lead: tuple[int, ...], tail: tuple[int, ...] = ()
) -> np.ndarray:
    """Array of shape ``(*lead, n_agents, *tail)``; agent ``i``'s slice comes
    from its own ``(seed, purpose, i)`` stream."""
    cols = [stream(seed, purpose, i).random((*lead, *tail)) for i in range(n_agents)]
    return np.stack(cols, axis=len(lead))
