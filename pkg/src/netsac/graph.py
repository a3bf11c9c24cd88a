"""Undirected agent interaction graphs and hop neighborhoods."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence


@dataclass(frozen=True)
class Neighborhood:
    center: int
    kappa: int
    members: tuple[int, ...]

    def __contains__(self, agent: int) -> bool:
        return agent in self.members

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)


@dataclass(frozen=True)
class Graph:
    """Undirected graph over agents ``0..n-1``.

    Edges are stored canonically as sorted ``(u, v)`` pairs with ``u < v``.
    Self-inclusion is a neighborhood convention, so self-loops are rejected.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    _adj: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __init__(self, n: int, edges: Iterable[Sequence[int]] = ()):
        if n < 1:
            raise ValueError(f"graph needs at least one node, got n={n}")
        canon = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) has an endpoint outside 0..{n - 1}")
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            canon.add((min(u, v), max(u, v)))
        adj: list[list[int]] = [[] for _ in range(n)]
        for u, v in canon:
            adj[u].append(v)
            adj[v].append(u)
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "edges", tuple(sorted(canon)))
        object.__setattr__(self, "_adj", tuple(tuple(sorted(a)) for a in adj))

    @classmethod
    def line(cls, n: int) -> Graph:
        return cls(n, [(i, i + 1) for i in range(n - 1)])

    @classmethod
    def ring(cls, n: int) -> Graph:
        if n < 3:
            return cls.line(n)
        return cls(n, [(i, (i + 1) % n) for i in range(n)])

    def neighbors(self, i: int) -> tuple[int, ...]:
        """Adjacent nodes of ``i`` (excluding ``i``)."""
        self._check(i)
        return self._adj[i]

    def closed_neighbors(self, i: int) -> tuple[int, ...]:
        """``N_i``: sorted neighbors of ``i`` including ``i`` itself."""
        return tuple(sorted((i, *self.neighbors(i))))

    def distances_from(self, i: int) -> list[float]:
        self._check(i)
        dist = [float("inf")] * self.n
        dist[i] = 0
        queue = deque([i])
        while queue:
            u = queue.popleft()
            for v in self._adj[u]:
                if dist[v] == float("inf"):
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist

    def eccentricity(self, i: int) -> float:
        return max(self.distances_from(i))

    def diameter(self) -> float:
        return max(self.eccentricity(i) for i in range(self.n))

    def max_neighborhood_size(self, kappa: int) -> int:
        """``f(kappa)``, the size of the largest kappa-hop neighborhood."""
        return max(len(khop_neighborhood(self, i, kappa)) for i in range(self.n))

    def _check(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise IndexError(f"agent {i} out of range for graph with n={self.n}")


def khop_neighborhood(graph: Graph, i: int, kappa: int) -> Neighborhood:
    """All agents within graph distance ``kappa`` of ``i``, sorted ascending."""
    if kappa < 0:
        raise ValueError(f"kappa must be non-negative, got {kappa}")
    graph._check(i)
    depth = {i: 0}
    queue = deque([i])
    while queue:
        u = queue.popleft()
        if depth[u] == kappa:
            continue
        for v in graph.neighbors(u):
            if v not in depth:
                depth[v] = depth[u] + 1
                queue.append(v)
    return Neighborhood(center=i, kappa=kappa, members=tuple(sorted(depth)))


def read_edge_list(path: str | Path) -> Graph:
    """Parse the ``n <count>`` header plus ``u v`` lines format.

    Blank lines and ``#`` comments are ignored.
    """
    n = None
    edges = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if n is None:
            if len(parts) != 2 or parts[0] != "n":
                raise ValueError(f"{path}:{lineno}: expected header 'n <count>'")
            n = int(parts[1])
            continue
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'u v', got {line!r}")
        edges.append((int(parts[0]), int(parts[1])))
    if n is None:
        raise ValueError(f"{path}: missing 'n <count>' header")
    return Graph(n, edges)


def write_edge_list(graph: Graph, path: str | Path) -> None:
    lines = [f"n {graph.n}"] + [f"{u} {v}" for u, v in graph.edges]
    Path(path).write_text("\n".join(lines) + "\n")
