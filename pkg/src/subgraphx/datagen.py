"""Deterministic synthetic datasets with ground-truth motifs.

Two families: graph classification over Barabasi-Albert bases with an
attached house or five-node cycle motif, and a single node-classification
graph of a large BA base decorated with house motifs. All node features are
10-dimensional all-ones vectors, so the models must learn from structure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataio import DatasetRecord
from .errors import InputError
from .graph import Graph

FEATURE_DIM = 10

# house: 4-cycle (0,1,2,3) plus a roof apex (4) over the 0-1 edge
_HOUSE_EDGES = ((0, 1), (1, 2), (2, 3), (0, 3), (0, 4), (1, 4))
_HOUSE_ANCHOR = 2  # bottom corner used for the attachment edge
# node-classification roles within a house: apex=top, 0/1=middle, 2/3=bottom
_HOUSE_ROLES = {0: 2, 1: 2, 2: 3, 3: 3, 4: 1}

_CYCLE_EDGES = ((0, 1), (1, 2), (2, 3), (3, 4), (0, 4))
_CYCLE_ANCHOR = 0


@dataclass(frozen=True)
class MotifSpec:
    kind: str  # "house" | "cycle5"
    nodes: tuple

    def __post_init__(self):
        if self.kind not in ("house", "cycle5"):
            raise InputError(f"unknown motif kind {self.kind!r}")
        if len(self.nodes) != 5:
            raise InputError("motifs have exactly 5 nodes")


def _ba_edges(n: int, m_attach: int, rng: np.random.Generator) -> list:
    """Preferential-attachment edge list: an m-node seed clique, then each
    new node attaches m edges to existing nodes with probability
    proportional to current degree (without replacement)."""
    edges = []
    degree = np.zeros(n)
    for u in range(m_attach):
        for v in range(u + 1, m_attach):
            edges.append((u, v))
            degree[u] += 1
            degree[v] += 1
    for new in range(m_attach, n):
        existing = np.arange(new)
        total = degree[:new].sum()
        if total == 0:
            p = None  # degenerate first step of an edgeless seed: uniform
        else:
            p = degree[:new] / total
        targets = rng.choice(existing, size=m_attach, replace=False, p=p)
        for t in targets:
            t = int(t)
            edges.append((t, new))
            degree[t] += 1
            degree[new] += 1
    return edges


def gen_ba(n: int, m_attach: int, seed) -> Graph:
    """Connected Barabasi-Albert graph with all-ones features."""
    if not (n > m_attach >= 1):
        raise InputError(f"need n > m_attach >= 1, got n={n}, m_attach={m_attach}")
    rng = np.random.default_rng(seed)
    edges = _ba_edges(n, m_attach, rng)
    return Graph(num_nodes=n, edges=tuple(edges), features=np.ones((n, FEATURE_DIM)))


def _attach_motif(base_edges: list, base_n: int, motif_edges, anchor: int,
                  rng: np.random.Generator):
    """Append a 5-node motif and one attachment edge to a random base node."""
    offset = base_n
    edges = list(base_edges)
    for u, v in motif_edges:
        edges.append((offset + u, offset + v))
    attach_to = int(rng.integers(0, base_n))
    edges.append((attach_to, offset + anchor))
    motif_nodes = tuple(range(offset, offset + 5))
    return edges, motif_nodes


def gen_ba2motifs(num_graphs: int = 1000, seed: int = 0):
    """Graph-classification set: 20-node BA base plus a house (label 1) or
    five-node cycle (label 0), alternating for an exact split when even.

    Returns (records, ground_truth) where ground_truth maps record id to
    {"motif": kind, "nodes": [...]}.
    """
    if num_graphs < 2:
        raise InputError("num_graphs must be >= 2")
    records = []
    truth = {}
    for i in range(num_graphs):
        rng = np.random.default_rng((seed, i))
        base = _ba_edges(20, 1, rng)
        label = i % 2
        if label == 1:
            edges, motif_nodes = _attach_motif(base, 20, _HOUSE_EDGES, _HOUSE_ANCHOR, rng)
            kind = "house"
        else:
            edges, motif_nodes = _attach_motif(base, 20, _CYCLE_EDGES, _CYCLE_ANCHOR, rng)
            kind = "cycle5"
        gid = f"g{i:04d}"
        g = Graph(
            num_nodes=25,
            edges=tuple(edges),
            features=np.ones((25, FEATURE_DIM)),
            label=label,
        )
        records.append(DatasetRecord(gid, g))
        truth[gid] = {"motif": kind, "nodes": list(motif_nodes)}
    return records, truth


BASHAPE_BASE_NODES = 300
BASHAPE_NUM_HOUSES = 80


def gen_bashape(seed: int = 0):
    """Node-classification graph: 300-node BA base plus 80 attached houses
    (700 nodes, 4 classes: 0 base, 1 top, 2 middle, 3 bottom).

    Returns (records, ground_truth): one record per node sharing the same
    structure, labeled by the node's structural role; ground truth maps
    motif-node record ids to their house's node list.
    """
    rng = np.random.default_rng(seed)
    edges = _ba_edges(BASHAPE_BASE_NODES, 1, rng)
    labels = [0] * BASHAPE_BASE_NODES
    houses = []
    for _ in range(BASHAPE_NUM_HOUSES):
        offset = BASHAPE_BASE_NODES + 5 * len(houses)
        for u, v in _HOUSE_EDGES:
            edges.append((offset + u, offset + v))
        attach_to = int(rng.integers(0, BASHAPE_BASE_NODES))
        edges.append((attach_to, offset + _HOUSE_ANCHOR))
        houses.append(tuple(range(offset, offset + 5)))
        labels.extend(_HOUSE_ROLES[r] for r in range(5))
    num_nodes = BASHAPE_BASE_NODES + 5 * BASHAPE_NUM_HOUSES
    template = Graph(
        num_nodes=num_nodes,
        edges=tuple(edges),
        features=np.ones((num_nodes, FEATURE_DIM)),
    )
    records = []
    truth = {}
    house_of = {}
    for house in houses:
        for n in house:
            house_of[n] = house
    for node in range(num_nodes):
        rid = f"n{node:04d}"
        # records share the template's canonical edge tuple and feature array
        g = Graph(
            num_nodes=num_nodes,
            edges=template.edges,
            features=template.features,
            label=labels[node],
            target_node=node,
        )
        records.append(DatasetRecord(rid, g))
        if node in house_of:
            truth[rid] = {"motif": "house", "nodes": list(house_of[node])}
    return records, truth
