"""Directed communication graphs and per-step topology sampling.

Node ids are 0-based everywhere in this package.  An edge ``(j, i)`` means
information flows from ``j`` to ``i``, i.e. ``j`` is an in-neighbor of ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class Digraph:
    """Unweighted directed graph stored as in-neighbor sets.

    Attributes:
        n: number of nodes.
        in_neighbors: ``in_neighbors[i]`` is the set of ``j`` with an edge j -> i.
    """

    n: int
    in_neighbors: tuple[frozenset[int], ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("a digraph needs at least one node")
        if len(self.in_neighbors) != self.n:
            raise ValueError(f"expected {self.n} neighbor sets, got {len(self.in_neighbors)}")
        for i, nbrs in enumerate(self.in_neighbors):
            if i in nbrs:
                raise ValueError(f"self-loop at node {i}")
            for j in nbrs:
                if not 0 <= j < self.n:
                    raise ValueError(f"neighbor {j} of node {i} out of range")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]], symmetric: bool = False) -> "Digraph":
        """Build from ``(src, dst)`` pairs; ``symmetric`` adds the reverse of each."""
        sets: list[set[int]] = [set() for _ in range(n)]
        for src, dst in edges:
            src, dst = int(src), int(dst)
            if not (0 <= src < n and 0 <= dst < n):
                raise ValueError(f"edge ({src}, {dst}) has a node id outside [0, {n})")
            sets[dst].add(src)
            if symmetric:
                sets[src].add(dst)
        return cls(n, tuple(frozenset(s) for s in sets))

    @classmethod
    def from_adjacency(cls, adj: np.ndarray) -> "Digraph":
        """``adj[i, j]`` true iff ``j`` is an in-neighbor of ``i``."""
        adj = np.asarray(adj, dtype=bool)
        n = adj.shape[0]
        return cls(n, tuple(frozenset(np.flatnonzero(adj[i]).tolist()) for i in range(n)))

    @classmethod
    def complete(cls, n: int) -> "Digraph":
        return cls(n, tuple(frozenset(j for j in range(n) if j != i) for i in range(n)))

    @classmethod
    def empty(cls, n: int) -> "Digraph":
        return cls(n, tuple(frozenset() for _ in range(n)))

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n, self.n), dtype=bool)
        for i, nbrs in enumerate(self.in_neighbors):
            adj[i, list(nbrs)] = True
        return adj

    def edges(self) -> list[tuple[int, int]]:
        """Sorted ``(src, dst)`` pairs."""
        return sorted((j, i) for i, nbrs in enumerate(self.in_neighbors) for j in nbrs)

    def is_symmetric(self) -> bool:
        return all(i in self.in_neighbors[j] for i, nbrs in enumerate(self.in_neighbors) for j in nbrs)

    def subgraph(self, keep: Iterable[int]) -> "Digraph":
        """Induced subgraph, relabelled to ``0..len(keep)-1`` in sorted order."""
        keep = sorted(set(keep))
        index = {v: k for k, v in enumerate(keep)}
        return Digraph(
            len(keep),
            tuple(frozenset(index[j] for j in self.in_neighbors[v] if j in index) for v in keep),
        )


def in_neighbors(g: Digraph, i: int) -> frozenset[int]:
    if not 0 <= i < g.n:
        raise ValueError(f"node id {i} out of range for a {g.n}-node graph")
    return g.in_neighbors[i]


def strongly_connected_components(g: Digraph) -> list[int]:
    """Component label per node (iterative Tarjan over out-edges).

    Labels come out in reverse topological order of the condensation, but
    callers here only rely on them being a partition.
    """
    n = g.n
    out: list[list[int]] = [[] for _ in range(n)]
    for i, nbrs in enumerate(g.in_neighbors):
        for j in nbrs:
            out[j].append(i)

    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    comp = [-1] * n
    stack: list[int] = []
    counter = 0
    ncomp = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, pos = work[-1]
            if pos < len(out[v]):
                work[-1] = (v, pos + 1)
                w = out[v][pos]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp[w] = ncomp
                    if w == v:
                        break
                ncomp += 1
    return comp


def is_rooted(g: Digraph) -> bool:
    """True iff some node reaches every other node along directed edges.

    Equivalent to the SCC condensation having exactly one source component.
    """
    comp = strongly_connected_components(g)
    ncomp = max(comp) + 1
    has_incoming = [False] * ncomp
    for i, nbrs in enumerate(g.in_neighbors):
        for j in nbrs:
            if comp[j] != comp[i]:
                has_incoming[comp[i]] = True
    return sum(not h for h in has_incoming) == 1


def is_rooted_subgraph(g: Digraph, keep: Iterable[int]) -> bool:
    keep = set(keep)
    if not keep:
        raise ValueError("keep must be nonempty")
    return is_rooted(g.subgraph(keep))


@dataclass(frozen=True)
class TopologyProvider:
    """Either a fixed graph or a Bernoulli edge model resampled every step."""

    graph: Digraph | None = None
    n: int | None = None
    edge_prob: float | None = None
    symmetric: bool = True

    def __post_init__(self):
        if self.graph is None:
            if self.n is None or self.edge_prob is None:
                raise ConfigError("topology", "stochastic mode needs n and edge_prob")
            if not 0.0 <= self.edge_prob <= 1.0:
                raise ConfigError("topology.edge_prob", f"must lie in [0, 1], got {self.edge_prob}")
            if self.n < 1:
                raise ConfigError("topology.n", "must be positive")

    @classmethod
    def fixed(cls, graph: Digraph) -> "TopologyProvider":
        return cls(graph=graph)

    @classmethod
    def stochastic(cls, n: int, edge_prob: float, symmetric: bool = True) -> "TopologyProvider":
        return cls(n=n, edge_prob=edge_prob, symmetric=symmetric)

    @property
    def is_fixed(self) -> bool:
        return self.graph is not None

    @property
    def num_nodes(self) -> int:
        return self.graph.n if self.graph is not None else self.n

    def adjacency_block(self, rng: np.random.Generator, steps: int) -> np.ndarray:
        """Adjacency masks for ``steps`` consecutive steps, shape (steps, n, n).

        Stochastic mode consumes exactly ``n*n`` uniforms per step from
        ``rng`` whatever the edge probability, so the block for step k sits
        at a fixed stream offset.  Fixed mode consumes nothing and returns a
        single (1, n, n) mask.
        """
        if self.is_fixed:
            return self.graph.adjacency()[None]
        n = self.n
        u = rng.random((steps, n, n))
        if self.symmetric:
            upper = np.triu(u < self.edge_prob, 1)
            adj = upper | upper.transpose(0, 2, 1)
        else:
            adj = u < self.edge_prob
            idx = np.arange(n)
            adj[:, idx, idx] = False
        return adj


def sample_topology(p: TopologyProvider, rng: np.random.Generator, k: int = 0) -> Digraph:
    """The graph in force at step ``k``.

    ``rng`` must be the topology stream positioned at step ``k``; the engine
    draws steps in order so that position is ``k * n * n`` uniforms in.
    """
    if p.is_fixed:
        return p.graph
    return Digraph.from_adjacency(p.adjacency_block(rng, 1)[0])


def canonical_fig2_topology() -> Digraph:
    """10-node fixed graph: faulty {0, 4, 7}; nodes 1 and 5 have half-faulty
    neighborhoods; the normal nodes {1,2,3,5,6,8,9} induce a rooted graph."""
    return Digraph.from_edges(10, CANONICAL_FIG2_EDGES, symmetric=True)


def canonical_clock_topology() -> Digraph:
    """16-node ring with +4 chords on even ids; faulty {1, 5, 7, 11}."""
    return Digraph.from_edges(16, CANONICAL_CLOCK_EDGES, symmetric=True)


CANONICAL_FIG2_EDGES = [
    (1, 0), (1, 4), (1, 2), (1, 3),
    (5, 4), (5, 7), (5, 6), (5, 8),
    (2, 3), (2, 6), (3, 8), (6, 9), (8, 9), (9, 2),
]
CANONICAL_CLOCK_EDGES = [(i, (i + 1) % 16) for i in range(16)] + [
    (0, 4), (2, 6), (4, 8), (6, 10), (8, 12), (10, 14), (12, 0), (14, 2),
]
