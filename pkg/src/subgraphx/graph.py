"""Immutable undirected graphs and the node-set operations used by the search.

A subgraph is always identified by its node set; induced edges are implied.
Node sets are plain sorted tuples of ints so they can key dicts and caches.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Literal, Optional, Sequence

import numpy as np

from .errors import ContractViolationError, InputError

NodeSet = tuple[int, ...]  # node sets are strictly increasing tuples of node indices


def nodeset(nodes: Iterable[int]) -> NodeSet:
    """Canonical node set: sorted, deduplicated tuple."""
    return tuple(sorted(set(int(n) for n in nodes)))


@dataclass(frozen=True)
class Graph:
    """Undirected graph with per-node features and optional label / target node.

    Edges are stored canonically as (u, v) with u < v; no self-loops or
    duplicates. Instances are immutable and safe to share across workers.
    """

    num_nodes: int
    edges: tuple
    features: np.ndarray
    label: Optional[int] = None
    target_node: Optional[int] = None

    def __post_init__(self):
        if self.num_nodes < 0:
            raise InputError(f"num_nodes must be >= 0, got {self.num_nodes}")
        if not self._edges_canonical():
            canon = set()
            for e in self.edges:
                u, v = int(e[0]), int(e[1])
                if u == v:
                    raise InputError(f"self-loop ({u},{u}) not allowed")
                if not (0 <= u < self.num_nodes and 0 <= v < self.num_nodes):
                    raise InputError(f"edge ({u},{v}) out of range for {self.num_nodes} nodes")
                canon.add((min(u, v), max(u, v)))
            object.__setattr__(self, "edges", tuple(sorted(canon)))
        feats = self.features
        if not (
            isinstance(feats, np.ndarray)
            and feats.dtype == np.float64
            and feats.ndim == 2
            and not feats.flags.writeable
        ):
            feats = np.asarray(feats, dtype=np.float64)
            if feats.ndim != 2:
                raise InputError(f"features must be 2-D, got shape {feats.shape}")
            if not np.all(np.isfinite(feats)):
                raise InputError("features must be finite")
            feats = feats.copy()
            feats.setflags(write=False)
            object.__setattr__(self, "features", feats)
        if feats.shape[0] != self.num_nodes:
            raise InputError(
                f"features has {feats.shape[0]} rows, expected {self.num_nodes}"
            )
        if self.target_node is not None and not (0 <= self.target_node < self.num_nodes):
            raise InputError(f"target_node {self.target_node} out of range")

    def _edges_canonical(self) -> bool:
        """True when edges are already validated: shared canonical tuples can
        then be reused across records without re-allocation."""
        if not isinstance(self.edges, tuple):
            return False
        prev = None
        for e in self.edges:
            if not (isinstance(e, tuple) and len(e) == 2):
                return False
            u, v = e
            if not (isinstance(u, int) and isinstance(v, int)):
                return False
            if not (0 <= u < v < self.num_nodes):
                return False
            if prev is not None and e <= prev:
                return False
            prev = e
        return True

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @cached_property
    def neighbors(self) -> tuple:
        """Per-node sorted neighbor tuples."""
        adj = [[] for _ in range(self.num_nodes)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def neighbor_bits(self) -> tuple:
        """Per-node neighbor sets encoded as int bitmasks (bit i = node i)."""
        bits = [0] * self.num_nodes
        for u, v in self.edges:
            bits[u] |= 1 << v
            bits[v] |= 1 << u
        return tuple(bits)

    def degree(self, node: int) -> int:
        return len(self.neighbors[node])

    def adjacency(self) -> np.ndarray:
        """Dense 0/1 adjacency matrix."""
        a = np.zeros((self.num_nodes, self.num_nodes), dtype=np.float64)
        for u, v in self.edges:
            a[u, v] = 1.0
            a[v, u] = 1.0
        return a

    def all_nodes(self) -> NodeSet:
        return tuple(range(self.num_nodes))


@dataclass(frozen=True)
class PruneStrategy:
    """Ordering and cap for node-pruning candidates.

    ``low2high`` ranks candidates by ascending degree within the current
    induced subgraph, ``high2low`` by descending degree; ties break toward
    the smaller node index. ``k`` caps how many candidates are considered
    (None = unlimited).
    """

    order: Literal["low2high", "high2low"] = "low2high"
    k: Optional[int] = 12

    def __post_init__(self):
        if self.order not in ("low2high", "high2low"):
            raise InputError(f"unknown prune order {self.order!r}")
        if self.k is not None and self.k < 1:
            raise InputError(f"k must be >= 1 when finite, got {self.k}")


def _check_nodes(g: Graph, nodes: Sequence[int]) -> None:
    for n in nodes:
        if not (0 <= n < g.num_nodes):
            raise InputError(f"node {n} out of range for {g.num_nodes} nodes")


def mask_of(nodes: Iterable[int]) -> int:
    m = 0
    for n in nodes:
        m |= 1 << n
    return m


def nodes_of(mask: int) -> NodeSet:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def connected_components(g: Graph, nodes: Sequence[int]) -> list:
    """Partition ``nodes`` into maximal sets connected within the induced subgraph.

    Components are sorted by (size descending, smallest member ascending).
    """
    _check_nodes(g, nodes)
    allowed = mask_of(nodes)
    bits = g.neighbor_bits
    comps = []
    remaining = allowed
    while remaining:
        start = remaining & -remaining  # lowest set bit
        comp = start
        frontier = start
        while frontier:
            nxt = 0
            f = frontier
            i = 0
            while f:
                if f & 1:
                    nxt |= bits[i]
                f >>= 1
                i += 1
            frontier = nxt & allowed & ~comp
            comp |= frontier
        comps.append(comp)
        remaining &= ~comp
    out = [nodes_of(c) for c in comps]
    out.sort(key=lambda c: (-len(c), c[0]))
    return out


def is_connected(g: Graph, nodes: Sequence[int]) -> bool:
    if len(nodes) == 0:
        return False
    return len(connected_components(g, nodes)) == 1


def l_hop_neighbors(g: Graph, seed: Sequence[int], hops: int) -> NodeSet:
    """Nodes at shortest-path distance 1..hops from any seed node.

    Seed nodes themselves are excluded. ``hops`` may be ``math.inf`` (or any
    value >= num_nodes) to reach the whole component.
    """
    if len(seed) == 0:
        raise InputError("seed must be nonempty")
    _check_nodes(g, seed)
    if hops < 0:
        raise InputError(f"hops must be >= 0, got {hops}")
    bits = g.neighbor_bits
    seed_mask = mask_of(seed)
    visited = seed_mask
    frontier = seed_mask
    depth = 0
    limit = min(hops, g.num_nodes)
    while frontier and depth < limit:
        nxt = 0
        f = frontier
        i = 0
        while f:
            if f & 1:
                nxt |= bits[i]
            f >>= 1
            i += 1
        frontier = nxt & ~visited
        visited |= frontier
        depth += 1
    return nodes_of(visited & ~seed_mask)


def induced_degree_order(g: Graph, nodes: Sequence[int], order: str) -> list:
    """Nodes sorted by degree within the induced subgraph.

    Ascending for low2high, descending for high2low; ties by node index.
    """
    _check_nodes(g, nodes)
    if order not in ("low2high", "high2low"):
        raise InputError(f"unknown prune order {order!r}")
    allowed = mask_of(nodes)
    bits = g.neighbor_bits
    degs = {n: bin(bits[n] & allowed).count("1") for n in nodes}
    sign = 1 if order == "low2high" else -1
    return sorted(nodes, key=lambda n: (sign * degs[n], n))


def prune_actions(g: Graph, current: Sequence[int], strategy: PruneStrategy) -> list:
    """Child subgraphs reachable by one node-pruning action.

    Candidates are the first ``k`` nodes of the induced-degree ordering. For
    each candidate, the node and its incident induced edges are removed and
    only the largest remaining connected component is kept (equal sizes break
    toward the component containing the smallest index). Returns
    ``(pruned_node, child_nodeset)`` pairs with duplicate children dropped
    (first candidate wins).
    """
    current = tuple(current)
    if len(current) < 2:
        raise InputError(f"current subgraph must have >= 2 nodes, got {len(current)}")
    if not is_connected(g, current):
        raise ContractViolationError(f"current subgraph {current} is not connected")
    ranked = induced_degree_order(g, current, strategy.order)
    if strategy.k is not None:
        ranked = ranked[: strategy.k]
    children = []
    seen = set()
    for cand in ranked:
        rest = tuple(n for n in current if n != cand)
        comps = connected_components(g, rest)
        child = comps[0]
        if child not in seen:
            seen.add(child)
            children.append((cand, child))
    return children
