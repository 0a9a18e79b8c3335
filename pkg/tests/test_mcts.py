import math

import numpy as np
import pytest

from subgraphx import (
    CapacityError,
    ContractViolationError,
    Graph,
    InputError,
    PruneStrategy,
    ScorerConfig,
    SearchConfig,
    brute_force_best,
    build_reduced_game,
    connected_subgraphs,
    exact_shapley,
    forward,
    run_search,
    select_action,
    update_path,
)
from subgraphx.graph import is_connected
from subgraphx.mcts import ActionStat, SearchNode
from subgraphx.training import init_model

from conftest import random_connected_graph


class TestSelectAction:
    def test_all_zero_stats_tie_breaks_to_first_action(self):
        # fresh node: U = 0 and Q = 0 for every action, so the first
        # pruning candidate wins
        node = SearchNode(
            state=(0, 1, 2, 3),
            actions=[
                ActionStat(3, (0, 1, 2), 0.9),
                ActionStat(1, (0, 2, 3), 0.5),
            ],
            expanded=True,
        )
        assert select_action(node, 10.0).action == 3

    def test_pure_exploitation_lambda_zero(self):
        node = SearchNode(
            state=(0, 1, 2),
            actions=[
                ActionStat(0, (1, 2), 0.2, c=3, w=3.0),
                ActionStat(1, (0, 2), 0.9, c=3, w=0.6),
            ],
            expanded=True,
        )
        assert select_action(node, 0.0).action == 0

    def test_hand_computed_balance(self):
        # Q=(0.5,0.4), R=(0.1,0.9), C=(10,1), total=11, lambda=10
        node = SearchNode(
            state=(0, 1, 2),
            actions=[
                ActionStat(1, (0, 2), 0.1, c=10, w=5.0),
                ActionStat(2, (0, 1), 0.9, c=1, w=0.4),
            ],
            expanded=True,
        )
        scores = [
            0.5 + 10 * 0.1 * math.sqrt(11) / 11,
            0.4 + 10 * 0.9 * math.sqrt(11) / 2,
        ]
        assert scores[0] == pytest.approx(0.8015, abs=1e-3)
        assert scores[1] == pytest.approx(15.32, abs=0.01)
        assert select_action(node, 10.0).action == 2

    def test_no_actions_rejected(self):
        with pytest.raises(ContractViolationError):
            select_action(SearchNode(state=(0,), actions=[], expanded=True), 1.0)


class TestUpdatePath:
    def test_first_visit(self):
        act = ActionStat(0, (1,), 0.5)
        node = SearchNode(state=(0, 1), actions=[act], expanded=True)
        update_path([(node, act)], 0.7)
        assert (act.c, act.w, act.q) == (1, 0.7, 0.7)

    def test_second_visit_mean(self):
        act = ActionStat(0, (1,), 0.5, c=1, w=0.7)
        node = SearchNode(state=(0, 1), actions=[act], expanded=True)
        update_path([(node, act)], 0.3)
        assert act.c == 2
        assert act.w == pytest.approx(1.0)
        assert act.q == pytest.approx(0.5)

    def test_empty_path_noop(self):
        update_path([], 0.9)


@pytest.fixture
def tri_model(triangle):
    model = init_model("gcn", 2, [4], 2, "mean", seed=2)
    return model, triangle


class TestRunSearch:
    def test_trivial_root_at_or_below_nmin(self, tri_model):
        model, tri = tri_model
        cfg = SearchConfig(iterations=3, n_min=5, scorer=ScorerConfig("direct"))
        ex = run_search(model, tri, cfg)
        assert ex.nodes == (0, 1, 2)
        assert ex.sparsity == 0.0
        assert ex.per_size == {3: ((0, 1, 2), ex.score)}

    def test_triangle_exact_best_singleton(self, tri_model):
        model, tri = tri_model
        cfg = SearchConfig(
            iterations=30,
            n_min=1,
            exploration=5.0,
            strategy=PruneStrategy("low2high", None),
            scorer=ScorerConfig("shapley-exact", hops=2),
            seed=0,
        )
        ex = run_search(model, tri, cfg)
        y = forward(model, tri).predicted_class
        singles = {
            (n,): exact_shapley(build_reduced_game(model, tri, (n,), y, hops=2)).value
            for n in range(3)
        }
        assert set(ex.nodes) <= {0, 1, 2}
        assert len(ex.nodes) == 1
        assert ex.score == max(singles.values())

    def test_deterministic(self, cycle5):
        model = init_model("gcn", 3, [4], 2, "mean", seed=7)
        cfg = SearchConfig(iterations=10, n_min=2, scorer=ScorerConfig("shapley-mc", 16, 2), seed=5)
        a = run_search(model, cycle5, cfg)
        b = run_search(model, cycle5, cfg)
        assert a == b

    def test_explanation_nodes_connected_and_scored(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            g = random_connected_graph(rng, 8, feature_dim=3)
            model = init_model("gcn", 3, [4], 2, "mean", seed=int(rng.integers(50)))
            cfg = SearchConfig(
                iterations=8, n_min=3, scorer=ScorerConfig("direct"), seed=1
            )
            ex = run_search(model, g, cfg)
            assert is_connected(g, ex.nodes)
            assert len(ex.nodes) <= 3
            for size, (nodes, _) in ex.per_size.items():
                assert len(nodes) == size
                assert is_connected(g, nodes)

    def test_disconnected_graph_uses_largest_component(self):
        g = Graph(
            num_nodes=6,
            edges=((0, 1), (1, 2), (2, 3), (4, 5)),
            features=np.ones((6, 2)),
        )
        model = init_model("gcn", 2, [3], 2, "mean", seed=0)
        cfg = SearchConfig(iterations=4, n_min=2, scorer=ScorerConfig("direct"), seed=0)
        ex = run_search(model, g, cfg)
        assert set(ex.nodes) <= {0, 1, 2, 3}

    def test_node_task_root_is_computation_graph(self):
        g = Graph(
            num_nodes=7,
            edges=tuple((i, i + 1) for i in range(6)),
            features=np.ones((7, 2)),
            target_node=0,
        )
        model = init_model("gcn", 2, [3, 3], 3, "none", seed=1)
        cfg = SearchConfig(iterations=5, n_min=2, scorer=ScorerConfig("shapley-mc", 8, 2), seed=0)
        ex = run_search(model, g, cfg, task="node")
        # 2-layer model: root = nodes within 2 hops of node 0 = {0,1,2}
        assert set(ex.nodes) <= {0, 1, 2}

    def test_node_task_requires_target(self, cycle5):
        model = init_model("gcn", 3, [3], 2, "none", seed=1)
        cfg = SearchConfig(iterations=2, n_min=2, scorer=ScorerConfig("direct"))
        with pytest.raises(InputError):
            run_search(model, cycle5, cfg, task="node")

    def test_visit_counts_match_traversals(self, cycle5):
        model = init_model("gcn", 3, [4], 2, "mean", seed=7)
        cfg = SearchConfig(
            iterations=12, n_min=2,
            strategy=PruneStrategy("low2high", None),
            scorer=ScorerConfig("direct"), seed=3,
        )
        # rerun the search loop manually to verify sum(C) per node equals
        # the number of iterations that passed through it selecting an action
        from subgraphx.mcts import search_root, make_scorer, prune_actions

        pred = forward(model, cycle5)
        score_fn = make_scorer(model, cycle5, cfg.scorer, cfg.seed, pred.predicted_class)
        scores = {}

        def cached(state):
            if state not in scores:
                scores[state] = score_fn(state)
            return scores[state]

        root = search_root(model, cycle5, "graph")
        registry = {root: SearchNode(root)}
        traversals = {}
        for _ in range(cfg.iterations):
            node = registry[root]
            path = []
            while len(node.state) > cfg.n_min:
                if not node.expanded:
                    for action, child in prune_actions(cycle5, node.state, cfg.strategy):
                        node.actions.append(ActionStat(action, child, cached(child)))
                    node.expanded = True
                act = select_action(node, cfg.exploration)
                traversals[node.state] = traversals.get(node.state, 0) + 1
                path.append((node, act))
                if act.child not in registry:
                    registry[act.child] = SearchNode(act.child)
                node = registry[act.child]
            update_path(path, cached(node.state))
        for state, node in registry.items():
            if node.actions:
                assert sum(a.c for a in node.actions) == traversals.get(state, 0)
                for a in node.actions:
                    if a.c > 0:
                        assert a.q == pytest.approx(a.w / a.c)

    def test_diagnostics_present(self, cycle5):
        model = init_model("gcn", 3, [4], 2, "mean", seed=7)
        cfg = SearchConfig(iterations=3, n_min=2, scorer=ScorerConfig("direct"), seed=0)
        ex = run_search(model, cycle5, cfg)
        d = ex.diagnostics
        assert d["iterations"] == 3
        assert d["states_expanded"] >= 1
        assert d["forward_passes"] > 0


class TestBruteForce:
    def test_enumeration_counts(self, triangle):
        assert len(connected_subgraphs(triangle, 1)) == 3
        sq = Graph(
            num_nodes=4,
            edges=((0, 1), (1, 2), (2, 3), (0, 3)),
            features=np.zeros((4, 1)),
        )
        assert len(connected_subgraphs(sq, 2)) == 4
        assert connected_subgraphs(sq, 2) == [(0, 1), (0, 3), (1, 2), (2, 3)]

    def test_whole_graph_single_candidate(self, tri_model):
        model, tri = tri_model
        nodes, score = brute_force_best(model, tri, 3, ScorerConfig("shapley-exact", hops=2))
        assert nodes == (0, 1, 2)
        game = build_reduced_game(model, tri, (0, 1, 2), forward(model, tri).predicted_class, hops=2)
        assert score == pytest.approx(exact_shapley(game).value, abs=1e-12)

    def test_matches_manual_enumeration(self, tri_model):
        model, tri = tri_model
        y = forward(model, tri).predicted_class
        best_nodes, best_score = brute_force_best(model, tri, 1, ScorerConfig("shapley-exact", hops=2))
        singles = {
            (n,): exact_shapley(build_reduced_game(model, tri, (n,), y, hops=2)).value
            for n in range(3)
        }
        assert best_score == max(singles.values())
        assert singles[best_nodes] == best_score

    def test_capacity_guard(self):
        g = Graph(num_nodes=13, edges=tuple((i, i + 1) for i in range(12)), features=np.zeros((13, 2)))
        model = init_model("gcn", 2, [3], 2, "mean", seed=0)
        with pytest.raises(CapacityError):
            brute_force_best(model, g, 3, ScorerConfig("shapley-exact", hops=2))


def test_config_validation():
    with pytest.raises(InputError):
        SearchConfig(iterations=0)
    with pytest.raises(InputError):
        SearchConfig(n_min=0)
    with pytest.raises(InputError):
        ScorerConfig("nonsense")
    with pytest.raises(InputError):
        ScorerConfig("shapley-mc", samples=0)


def test_explanation_score_equals_cached_immediate_score(cycle5):
    model = init_model("gcn", 3, [4], 2, "mean", seed=7)
    cfg = SearchConfig(iterations=8, n_min=2, scorer=ScorerConfig("shapley-mc", 16, 2), seed=5)
    ex = run_search(model, cycle5, cfg)
    # recompute the scorer for the chosen state: identical by state-derived seeding
    from subgraphx.mcts import make_scorer
    y = forward(model, cycle5).predicted_class
    score_fn = make_scorer(model, cycle5, cfg.scorer, cfg.seed, y)
    assert ex.score == score_fn(ex.nodes)
    assert ex.per_size[len(ex.nodes)][1] >= ex.score or ex.per_size[len(ex.nodes)][0] == ex.nodes
