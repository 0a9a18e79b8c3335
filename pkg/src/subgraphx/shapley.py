"""Game-theoretic subgraph scoring.

A candidate subgraph is one player; every outside node within the scoring
hop range is a singleton co-player. The value of a coalition is the model's
predicted probability for the target class after zero-padding the features
of all nodes outside the coalition. Scores are Shapley values of the
subgraph player, computed exactly by enumeration or approximated by
permutation sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import CapacityError, InputError
from .graph import Graph, l_hop_neighbors, is_connected, mask_of, nodes_of, nodeset
from .model import GraphEvaluator, ModelSpec

MAX_EXACT_PLAYERS = 20


class ValueOracle:
    """Cached occlusion evaluator for one (model, graph, protected set).

    Active sets are int bitmasks over the graph's node indices. Protected
    nodes are always kept active. For node-classification targets (``focus``)
    the evaluation runs on the induced subgraph of the (L+1)-hop ball around
    the focus node, which reproduces the focus prediction exactly while
    keeping repeated evaluations cheap.
    """

    def __init__(self, model: ModelSpec, graph: Graph, protected: Sequence[int] = (),
                 focus: Optional[int] = None):
        self.model = model
        self.graph = graph
        self.protected_mask = mask_of(protected)
        self.focus = focus
        if focus is None:
            self._ball = None
            self._evaluator = GraphEvaluator(model, graph)
        else:
            ball = nodeset((focus,) + l_hop_neighbors(graph, (focus,), model.num_layers + 1))
            local = {orig: i for i, orig in enumerate(ball)}
            sub_edges = tuple(
                (local[u], local[v]) for u, v in graph.edges if u in local and v in local
            )
            sub = Graph(
                num_nodes=len(ball),
                edges=sub_edges,
                features=graph.features[list(ball)],
                target_node=local[focus],
            )
            self._ball = ball
            self._evaluator = GraphEvaluator(model, sub, focus=local[focus])
        self._cache: dict = {}

    @property
    def forward_count(self) -> int:
        return self._evaluator.forward_count

    def _rows_for(self, masks: Sequence[int]) -> np.ndarray:
        if self._ball is None:
            n = self.graph.num_nodes
            idx = range(n)
        else:
            idx = self._ball
            n = len(self._ball)
        rows = np.zeros((len(masks), n))
        for r, m in enumerate(masks):
            for j, orig in enumerate(idx):
                if (m >> orig) & 1:
                    rows[r, j] = 1.0
        return rows

    def probs_many(self, active_masks: Sequence[int]) -> np.ndarray:
        """Class-probability rows for a batch of active-node bitmasks."""
        keys = [m | self.protected_mask for m in active_masks]
        missing = []
        seen = set()
        for k in keys:
            if k not in self._cache and k not in seen:
                seen.add(k)
                missing.append(k)
        if missing:
            rows = self._rows_for(missing)
            probs = self._evaluator.probs_for_masks(rows)
            for k, p in zip(missing, probs):
                self._cache[k] = p
        return np.array([self._cache[k] for k in keys])

    def prob(self, active_mask: int, target_class: int) -> float:
        return float(self.probs_many([active_mask])[0][target_class])


@dataclass(frozen=True)
class ScoreEstimate:
    value: float
    num_samples: int
    estimator: str  # exact_full | exact_reduced | monte_carlo | direct

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise InputError("score estimate must be finite")
        if self.estimator == "monte_carlo" and self.num_samples < 1:
            raise InputError("monte_carlo estimate needs num_samples >= 1")


@dataclass(frozen=True)
class CoalitionGame:
    """Player 0 is the target subgraph; players 1..n are singleton nodes."""

    model: ModelSpec
    graph: Graph
    target_subgraph: tuple
    other_players: tuple
    target_class: int
    protected_nodes: tuple = ()
    hops: float = 3
    oracle: ValueOracle = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if not self.target_subgraph:
            raise InputError("target subgraph must be nonempty")
        if not (0 <= self.target_class < self.model.num_classes):
            raise InputError(f"target_class {self.target_class} out of range")
        taken = set(self.target_subgraph)
        for p in self.other_players:
            for n in p:
                if n in taken:
                    raise InputError(f"player node {n} overlaps another player")
                taken.add(n)
        if self.oracle is None:
            focus = None
            if self.model.readout == "none":
                focus = self.graph.target_node
            object.__setattr__(
                self,
                "oracle",
                ValueOracle(self.model, self.graph, self.protected_nodes, focus=focus),
            )

    @property
    def num_players(self) -> int:
        return 1 + len(self.other_players)

    def player_bits(self) -> list:
        return [mask_of(self.target_subgraph)] + [mask_of(p) for p in self.other_players]


def build_reduced_game(
    model: ModelSpec,
    g: Graph,
    subgraph: Sequence[int],
    target_class: int,
    hops: float,
    protected: Sequence[int] = (),
    oracle: Optional[ValueOracle] = None,
) -> CoalitionGame:
    """Game over the subgraph player plus its hop-limited singleton co-players.

    ``hops=math.inf`` keeps every outside node in the subgraph's component as
    a player (the full-player-set variant).
    """
    sub = nodeset(subgraph)
    if not sub:
        raise InputError("subgraph must be nonempty")
    if hops < 1:
        raise InputError(f"hops must be >= 1, got {hops}")
    if not is_connected(g, sub):
        raise InputError("subgraph must induce a connected subgraph")
    neighborhood = l_hop_neighbors(g, sub, hops)
    prot = set(protected)
    others = tuple((n,) for n in neighborhood if n not in prot)
    return CoalitionGame(
        model=model,
        graph=g,
        target_subgraph=sub,
        other_players=others,
        target_class=target_class,
        protected_nodes=nodeset(protected),
        hops=hops,
        oracle=oracle,
    )


def _active_mask(game: CoalitionGame, coalition: Iterable[int]) -> int:
    bits = game.player_bits()
    m = 0
    for pid in coalition:
        if not (0 <= pid < game.num_players):
            raise InputError(f"player id {pid} out of range")
        m |= bits[pid]
    return m


def value_function(game: CoalitionGame, coalition: Iterable[int]) -> float:
    """Predicted target-class probability with only the coalition's nodes
    (plus protected nodes) keeping their features."""
    return game.oracle.prob(_active_mask(game, coalition), game.target_class)


def marginal_contribution(game: CoalitionGame, coalition: Iterable[int]) -> float:
    """v(S + target player) - v(S) for a coalition S of co-players."""
    coalition = list(coalition)
    if 0 in coalition:
        raise InputError("coalition must not contain the target player")
    base = _active_mask(game, coalition)
    with_target = base | game.player_bits()[0]
    probs = game.oracle.probs_many([with_target, base])
    return float(probs[0][game.target_class] - probs[1][game.target_class])


def _subset_weights(num_players: int) -> list:
    fact = [math.factorial(i) for i in range(num_players + 1)]
    denom = fact[num_players]
    return [fact[s] * fact[num_players - s - 1] / denom for s in range(num_players)]


def exact_shapley(game: CoalitionGame) -> ScoreEstimate:
    """Exact Shapley value of the target subgraph player by full enumeration."""
    p = game.num_players
    if p > MAX_EXACT_PLAYERS:
        raise CapacityError(f"{p} players exceeds the exact enumeration cap of {MAX_EXACT_PLAYERS}")
    n = p - 1
    bits = game.player_bits()
    other_bits = bits[1:]
    target_bit = bits[0]
    # active-node masks for every co-player subset, built incrementally
    active = [0] * (1 << n)
    for s in range(1, 1 << n):
        low = s & -s
        active[s] = active[s & (s - 1)] | other_bits[low.bit_length() - 1]
    without = game.oracle.probs_many(active)[:, game.target_class]
    with_t = game.oracle.probs_many([a | target_bit for a in active])[:, game.target_class]
    weights = _subset_weights(p)
    value = 0.0
    for s in range(1 << n):
        value += weights[bin(s).count("1")] * (with_t[s] - without[s])
    estimator = "exact_full" if math.isinf(game.hops) else "exact_reduced"
    return ScoreEstimate(value=float(value), num_samples=1 << n, estimator=estimator)


def _sample_coalition(num_players: int, seed: int, t: int) -> tuple:
    """Co-player ids preceding the target player in a seeded permutation.

    Each sample draws from an RNG stream derived from (seed, t), so results
    do not depend on evaluation order or parallelism.
    """
    rng = np.random.default_rng((seed, t))
    perm = rng.permutation(num_players)
    cut = int(np.nonzero(perm == 0)[0][0])
    return tuple(int(x) for x in perm[:cut])


def mc_shapley(game: CoalitionGame, samples: int, seed: int) -> ScoreEstimate:
    """Monte-Carlo Shapley estimate via permutation sampling.

    Coalition t is the set of co-players preceding the target player in a
    uniformly random permutation; the estimate is the mean marginal
    contribution over ``samples`` draws.
    """
    if samples < 1:
        raise InputError(f"samples must be >= 1, got {samples}")
    p = game.num_players
    bits = game.player_bits()
    target_bit = bits[0]
    masks = []
    for t in range(samples):
        m = 0
        for pid in _sample_coalition(p, seed, t):
            m |= bits[pid]
        masks.append(m)
    unique = sorted(set(masks))
    without = game.oracle.probs_many(unique)[:, game.target_class]
    with_t = game.oracle.probs_many([m | target_bit for m in unique])[:, game.target_class]
    marginal = {m: float(w) - float(wo) for m, w, wo in zip(unique, with_t, without)}
    value = sum(marginal[m] for m in masks) / samples
    return ScoreEstimate(value=value, num_samples=samples, estimator="monte_carlo")


def direct_score(
    model: ModelSpec,
    g: Graph,
    subgraph: Sequence[int],
    target_class: int,
    protected: Sequence[int] = (),
    oracle: Optional[ValueOracle] = None,
) -> ScoreEstimate:
    """Predicted probability with only the subgraph itself active."""
    sub = nodeset(subgraph)
    if not sub:
        raise InputError("subgraph must be nonempty")
    if oracle is None:
        focus = g.target_node if model.readout == "none" else None
        oracle = ValueOracle(model, g, protected, focus=focus)
    value = oracle.prob(mask_of(sub), target_class)
    return ScoreEstimate(value=value, num_samples=1, estimator="direct")


# ---------------------------------------------------------------------------
# Generic surfaces over arbitrary value functions (used for axiom checks and
# synthetic table games; the model-backed paths above share the same math).
# ---------------------------------------------------------------------------


def shapley_values(value_fn: Callable, num_players: int) -> np.ndarray:
    """Exact Shapley value of every player of a set function.

    ``value_fn`` maps a frozenset of player indices to a float.
    """
    if num_players > MAX_EXACT_PLAYERS:
        raise CapacityError(f"{num_players} players exceeds the cap of {MAX_EXACT_PLAYERS}")
    if num_players < 1:
        raise InputError("need at least one player")
    values = {}
    for s in range(1 << num_players):
        members = frozenset(i for i in range(num_players) if (s >> i) & 1)
        values[s] = float(value_fn(members))
    weights = _subset_weights(num_players)
    phi = np.zeros(num_players)
    for i in range(num_players):
        bit = 1 << i
        for s in range(1 << num_players):
            if s & bit:
                continue
            phi[i] += weights[bin(s).count("1")] * (values[s | bit] - values[s])
    return phi


def exact_shapley_value(value_fn: Callable, num_players: int, player: int) -> float:
    return float(shapley_values(value_fn, num_players)[player])


def mc_shapley_value(
    value_fn: Callable, num_players: int, player: int, samples: int, seed: int
) -> float:
    """Permutation-sampling estimate of one player's Shapley value."""
    if samples < 1:
        raise InputError(f"samples must be >= 1, got {samples}")
    if not (0 <= player < num_players):
        raise InputError(f"player {player} out of range")
    marginals = {}
    total = 0.0
    for t in range(samples):
        rng = np.random.default_rng((seed, t))
        perm = rng.permutation(num_players)
        cut = int(np.nonzero(perm == player)[0][0])
        coalition = frozenset(int(x) for x in perm[:cut])
        if coalition not in marginals:
            marginals[coalition] = float(value_fn(coalition | {player})) - float(
                value_fn(coalition)
            )
        total += marginals[coalition]
    return total / samples
