"""Monte Carlo tree search over connected subgraphs.

The search tree is keyed by canonical node sets: states reached through
different pruning orders share one node, so per-state immediate scores are
computed exactly once per run. Selection follows the upper-confidence rule
Q + lambda * R * sqrt(sum C) / (1 + C); path statistics are updated with the
reached leaf's score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import CapacityError, ContractViolationError, InputError
from .graph import (
    Graph,
    PruneStrategy,
    connected_components,
    l_hop_neighbors,
    mask_of,
    nodes_of,
    nodeset,
    prune_actions,
)
from .model import ModelSpec, forward
from .shapley import (
    ScoreEstimate,
    ValueOracle,
    build_reduced_game,
    direct_score,
    exact_shapley,
    mc_shapley,
)

SCORER_KINDS = ("shapley-mc", "shapley-exact", "direct")


@dataclass(frozen=True)
class ScorerConfig:
    kind: str = "shapley-mc"
    samples: int = 100  # sampling steps for shapley-mc
    hops: float = 3  # co-player hop range for shapley scorers; math.inf = all nodes

    def __post_init__(self):
        if self.kind not in SCORER_KINDS:
            raise InputError(f"unknown scorer {self.kind!r}")
        if self.samples < 1:
            raise InputError("samples must be >= 1")
        if self.hops < 1:
            raise InputError("hops must be >= 1")


@dataclass(frozen=True)
class SearchConfig:
    iterations: int = 20  # search iterations (M)
    n_min: int = 5  # leaf threshold: a state with <= n_min nodes is a leaf
    exploration: float = 10.0  # lambda
    strategy: PruneStrategy = PruneStrategy()
    scorer: ScorerConfig = ScorerConfig()
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise InputError("iterations must be >= 1")
        if self.n_min < 1:
            raise InputError("n_min must be >= 1")
        if self.exploration < 0:
            raise InputError("exploration weight must be >= 0")


@dataclass
class ActionStat:
    """Statistics of one (node, action) pair; the action prunes one node."""

    action: int  # pruned node index
    child: tuple  # resulting canonical state
    r: float  # immediate score of the child state
    c: int = 0  # visit count
    w: float = 0.0  # total reward

    @property
    def q(self) -> float:
        return self.w / self.c if self.c > 0 else 0.0


@dataclass
class SearchNode:
    state: tuple
    actions: list = field(default_factory=list)
    expanded: bool = False


@dataclass(frozen=True)
class Explanation:
    nodes: tuple
    score: float
    sparsity: float
    predicted_class: int
    predicted_probability: float
    per_size: dict  # size -> (nodes, score)
    diagnostics: dict


def select_action(node: SearchNode, exploration: float) -> ActionStat:
    """Argmax of Q + lambda * R * sqrt(total C) / (1 + C).

    Ties take the earliest action in the pruning-candidate ordering (the
    first stored action). This keeps the ordering semantics of the pruning
    strategy meaningful on freshly expanded nodes, where all statistics are
    zero and the selection value is 0 for every action: a low2high walk then
    peels lowest-degree nodes first instead of drifting arbitrarily.
    """
    if not node.actions:
        raise ContractViolationError(f"state {node.state} has no actions")
    total = sum(a.c for a in node.actions)
    sqrt_total = math.sqrt(total)
    best = None
    best_score = -math.inf
    for a in node.actions:
        score = a.q + exploration * a.r * sqrt_total / (1 + a.c)
        if score > best_score:
            best = a
            best_score = score
    return best


def update_path(path: Sequence, leaf_score: float) -> None:
    """Credit the leaf's score to every (node, action) pair on the path."""
    for _, act in path:
        act.c += 1
        act.w += leaf_score


def _state_seed(seed: int, state: tuple) -> int:
    """Stable per-state scoring seed, independent of discovery order."""
    ss = np.random.SeedSequence([seed & 0x7FFFFFFF] + [int(n) for n in state])
    return int(ss.generate_state(1, np.uint64)[0])


def make_scorer(
    model: ModelSpec,
    g: Graph,
    config: ScorerConfig,
    seed: int,
    target_class: int,
    protected: Sequence[int] = (),
    oracle: Optional[ValueOracle] = None,
) -> Callable:
    """State -> immediate score function with a shared occlusion oracle."""
    if oracle is None:
        focus = g.target_node if model.readout == "none" else None
        oracle = ValueOracle(model, g, protected, focus=focus)

    def score(state: tuple) -> float:
        if config.kind == "direct":
            return direct_score(model, g, state, target_class, protected, oracle=oracle).value
        game = build_reduced_game(
            model, g, state, target_class, config.hops, protected, oracle=oracle
        )
        if config.kind == "shapley-exact":
            return exact_shapley(game).value
        return mc_shapley(game, config.samples, _state_seed(seed, state)).value

    score.oracle = oracle
    return score


def search_root(model: ModelSpec, g: Graph, task: str) -> tuple:
    """Root state: whole graph (largest component if disconnected) for graph
    tasks, the target node's computation graph for node tasks."""
    if task == "node":
        if g.target_node is None:
            raise InputError("node task requires graph.target_node")
        t = g.target_node
        return nodeset((t,) + l_hop_neighbors(g, (t,), model.num_layers))
    comps = connected_components(g, g.all_nodes())
    if not comps:
        raise InputError("graph has no nodes")
    return comps[0]


def run_search(model: ModelSpec, g: Graph, config: SearchConfig, task: str = "graph") -> Explanation:
    """Execute the subgraph search and return the best-scoring leaf.

    Every child of a visited state is scored on first expansion against the
    original full graph; per-size bests are harvested from all scored states.
    """
    if task not in ("graph", "node"):
        raise InputError(f"unknown task {task!r}")
    protected: tuple = ()
    if task == "node":
        if g.target_node is None:
            raise InputError("node task requires graph.target_node")
        protected = (g.target_node,)
        pred = forward(model, g)
    else:
        pred = forward(model, g)
    target_class = pred.predicted_class
    root_state = search_root(model, g, task)
    score_fn = make_scorer(
        model, g, config.scorer, config.seed, target_class, protected
    )
    scores: dict = {}

    def score_cached(state: tuple) -> float:
        if state not in scores:
            scores[state] = score_fn(state)
        return scores[state]

    registry: dict = {root_state: SearchNode(root_state)}
    leaves: set = set()
    states_expanded = 0

    for _ in range(config.iterations):
        node = registry[root_state]
        path = []
        while len(node.state) > config.n_min:
            if not node.expanded:
                for action, child in prune_actions(g, node.state, config.strategy):
                    node.actions.append(
                        ActionStat(action=action, child=child, r=score_cached(child))
                    )
                node.expanded = True
                states_expanded += 1
            act = select_action(node, config.exploration)
            path.append((node, act))
            if act.child not in registry:
                registry[act.child] = SearchNode(act.child)
            node = registry[act.child]
        leaves.add(node.state)
        update_path(path, score_cached(node.state))

    best_score = max(scores[leaf] for leaf in leaves)
    best = min(leaf for leaf in leaves if scores[leaf] == best_score)
    per_size: dict = {}
    for state, s in scores.items():
        size = len(state)
        if size not in per_size or s > per_size[size][1] or (
            s == per_size[size][1] and state < per_size[size][0]
        ):
            per_size[size] = (state, s)
    oracle = score_fn.oracle
    return Explanation(
        nodes=best,
        score=best_score,
        sparsity=1.0 - len(best) / g.num_nodes,
        predicted_class=target_class,
        predicted_probability=float(pred.probabilities[target_class]),
        per_size=dict(sorted(per_size.items())),
        diagnostics={
            "iterations": config.iterations,
            "states_expanded": states_expanded,
            "states_scored": len(scores),
            "leaf_count": len(leaves),
            "forward_passes": oracle.forward_count,
        },
    )


def connected_subgraphs(g: Graph, size: int, universe: Optional[Sequence[int]] = None) -> list:
    """All connected node sets of exactly ``size`` nodes within ``universe``."""
    if size < 1:
        raise InputError("size must be >= 1")
    nodes = tuple(universe) if universe is not None else g.all_nodes()
    allowed = mask_of(nodes)
    bits = g.neighbor_bits
    frontier = {1 << n for n in nodes}
    seen = set(frontier)
    for _ in range(size - 1):
        nxt = set()
        for s in frontier:
            reach = 0
            m = s
            while m:
                low = m & -m
                reach |= bits[low.bit_length() - 1]
                m &= m - 1
            reach &= allowed & ~s
            while reach:
                low = reach & -reach
                cand = s | low
                if cand not in seen:
                    seen.add(cand)
                    nxt.add(cand)
                reach &= reach - 1
        frontier = nxt
    return sorted(nodes_of(s) for s in frontier)


def brute_force_best(
    model: ModelSpec,
    g: Graph,
    size: int,
    scorer: ScorerConfig,
    task: str = "graph",
    seed: int = 0,
) -> tuple:
    """Exhaustive best connected subgraph of a given size under the scorer.

    Enumeration oracle for small graphs; ties break toward the
    lexicographically smallest node set.
    """
    if g.num_nodes > 12:
        raise CapacityError(f"{g.num_nodes} nodes exceeds the brute-force cap of 12")
    if not (1 <= size <= g.num_nodes):
        raise InputError(f"size {size} out of range")
    protected: tuple = ()
    if task == "node":
        protected = (g.target_node,)
    pred = forward(model, g)
    universe = search_root(model, g, task)
    score_fn = make_scorer(model, g, scorer, seed, pred.predicted_class, protected)
    best = None
    best_score = -math.inf
    for cand in connected_subgraphs(g, size, universe):
        s = score_fn(cand)
        if s > best_score:
            best, best_score = cand, s
    if best is None:
        raise InputError(f"no connected subgraph of size {size} in the search universe")
    return best, best_score
