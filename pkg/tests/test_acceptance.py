"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -s` to see the lines live. The
heavyweight fixtures (datasets, trained models, explanation batches) are
shared across criteria within the session.
"""

import json
import time

import numpy as np
import pytest
from click.testing import CliRunner

from subgraphx import (
    Graph,
    PruneStrategy,
    ScorerConfig,
    SearchConfig,
    brute_force_best,
    mc_shapley_value,
    motif_recall,
    run_search,
    shapley_values,
)
from subgraphx.cli import main as cli_main
from subgraphx.dataio import read_dataset, read_ground_truth
from subgraphx.datagen import gen_ba
from subgraphx.pipeline import run_eval, run_explain, run_gen, run_train, split_records
from subgraphx.schemas import EvalRequest, ExplainRequest, GenRequest, TrainRequest
from subgraphx.training import batch_loss_and_grads, build_batch, init_model, predict_batch
from subgraphx.weights import load_weights

from conftest import random_connected_graph
from test_training import max_grad_error, numeric_grads


def report(criterion, ok, detail):
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def table_game(seed):
    rng = np.random.default_rng((1000, seed))
    n = 2 + seed % 5
    table = {}
    for s in range(1 << n):
        members = frozenset(i for i in range(n) if (s >> i) & 1)
        table[members] = float(rng.uniform(0, 1))
    return n, table


# ---------------------------------------------------------------------- 1


def test_criterion_1_shapley_axioms():
    t0 = time.monotonic()
    worst = {"efficiency": 0.0, "symmetry": 0.0, "dummy": 0.0, "linearity": 0.0}
    for seed in range(100):
        n, table = table_game(seed)
        fn = lambda s: table[frozenset(s)]
        phi = shapley_values(fn, n)
        worst["efficiency"] = max(
            worst["efficiency"],
            abs(phi.sum() - (table[frozenset(range(n))] - table[frozenset()])),
        )
        sym = {
            s: (v + table[frozenset({1 if i == 0 else 0 if i == 1 else i for i in s})]) / 2
            for s, v in table.items()
        }
        phi_sym = shapley_values(lambda s: sym[frozenset(s)], n)
        worst["symmetry"] = max(worst["symmetry"], abs(phi_sym[0] - phi_sym[1]))
        dummy = {}
        for s in range(1 << (n + 1)):
            members = frozenset(i for i in range(n + 1) if (s >> i) & 1)
            dummy[members] = table[frozenset(i for i in members if i != n)]
        phi_dummy = shapley_values(lambda s: dummy[frozenset(s)], n + 1)
        worst["dummy"] = max(worst["dummy"], abs(phi_dummy[n]))
        rng2 = np.random.default_rng((1001, seed))
        other = {s: float(rng2.uniform(0, 1)) for s in table}
        phi_o = shapley_values(lambda s: other[frozenset(s)], n)
        phi_sum = shapley_values(lambda s: table[frozenset(s)] + other[frozenset(s)], n)
        worst["linearity"] = max(worst["linearity"], float(np.abs(phi_sum - phi - phi_o).max()))
    elapsed = time.monotonic() - t0
    ok = (
        worst["efficiency"] <= 1e-9
        and worst["symmetry"] <= 1e-12
        and worst["dummy"] <= 1e-12
        and worst["linearity"] <= 1e-9
        and elapsed < 10
    )
    report(1, ok, (
        f"axioms on 100 games: efficiency {worst['efficiency']:.2e} (<=1e-9), "
        f"symmetry {worst['symmetry']:.2e} (<=1e-12), dummy {worst['dummy']:.2e} (<=1e-12), "
        f"linearity {worst['linearity']:.2e} (<=1e-9), runtime {elapsed:.1f}s (<10s)"
    ))


# ---------------------------------------------------------------------- 2


def test_criterion_2_estimator_convergence():
    t0 = time.monotonic()
    hits_10k = 0
    errs_100 = []
    for seed in range(100):
        n, table = table_game(seed)
        fn = lambda s: table[frozenset(s)]
        exact = shapley_values(fn, n)[0]
        est = mc_shapley_value(fn, n, 0, samples=10000, seed=(2000 + seed))
        if abs(est - exact) <= 0.02:
            hits_10k += 1
        est100 = mc_shapley_value(fn, n, 0, samples=100, seed=(2000 + seed))
        errs_100.append(abs(est100 - exact))
    median_100 = float(np.median(errs_100))
    elapsed = time.monotonic() - t0
    ok = hits_10k >= 95 and median_100 <= 0.05 and elapsed < 60
    report(2, ok, (
        f"T=10000 within 0.02 on {hits_10k}/100 games (>=95); "
        f"T=100 median error {median_100:.4f} (<=0.05); runtime {elapsed:.1f}s (<60s)"
    ))


# ---------------------------------------------------------------------- 3


def test_criterion_3_gradient_checks():
    t0 = time.monotonic()
    worst = 0.0
    for i in range(10):
        rng = np.random.default_rng((3000, i))
        graphs = [
            random_connected_graph(rng, 6, feature_dim=4, label=int(k % 3))
            for k in range(2)
        ]
        for model_type in ("gcn", "gin"):
            for readout in ("max", "mean"):
                model = init_model(model_type, 4, [5, 5], 3, readout, seed=i)
                batch = build_batch(model, graphs)
                _, grads = batch_loss_and_grads(model, batch)
                worst = max(worst, max_grad_error(grads, numeric_grads(model, batch)))
    elapsed = time.monotonic() - t0
    ok = worst <= 1e-4 and elapsed < 30
    report(3, ok, (
        f"10 seeded 6-node instances x GCN/GIN x max/mean: worst relative gradient "
        f"error {worst:.2e} (<=1e-4, 1e-7 floor); runtime {elapsed:.1f}s (<30s)"
    ))


# ------------------------------------------------------------------- 4, 5


@pytest.fixture(scope="session")
def ba2_workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("ba2motifs")
    gen = run_gen(GenRequest(dataset="ba2motifs", out_dir=str(root), num_graphs=1000, seed=0))
    tr = run_train(TrainRequest(
        dataset=gen.dataset_path, out=str(root / "model.json"),
        model_type="gcn", task="graph", readout="max", hidden_dims=[20, 20, 20],
        epochs=2500, learning_rate=0.5, seed=0,
        init="degree-basis", occlusion_variants=32,
    ))
    model = load_weights(root / "model.json")
    records = read_dataset(gen.dataset_path)
    _, _, test_recs = split_records(records, 0)
    preds = predict_batch(model, [r.graph for r in test_recs])
    correct = [r for r, p in zip(test_recs, preds) if p.predicted_class == r.graph.label]
    picks = ",".join(r.graph_id for r in correct[:20])
    return {"root": root, "gen": gen, "train": tr, "picks": picks}


@pytest.fixture(scope="session")
def ba2_mc_explained(ba2_workspace):
    ws = ba2_workspace
    t0 = time.monotonic()
    run_explain(ExplainRequest(
        model=str(ws["root"] / "model.json"), dataset=ws["gen"].dataset_path,
        out_dir=str(ws["root"] / "ex_mc"), graphs=ws["picks"], scorer="shapley-mc",
        samples=100, hops=3, nmin=5, iterations=20, prune="low2high", prune_k=12,
        seed=0, workers=4, **{"lambda": 10.0},
    ))
    return {"dir": str(ws["root"] / "ex_mc"), "seconds": time.monotonic() - t0}


def test_criterion_4_motif_recovery(ba2_workspace, ba2_mc_explained):
    ws = ba2_workspace
    t0 = time.monotonic()
    ev = run_eval(EvalRequest(
        model=str(ws["root"] / "model.json"), dataset=ws["gen"].dataset_path,
        explanations=ba2_mc_explained["dir"], sizes=[5],
        ground_truth=ws["gen"].ground_truth_path,
    ))
    elapsed = ba2_mc_explained["seconds"] + (time.monotonic() - t0)
    acc = ws["train"].test_accuracy
    ok = acc >= 0.95 and ev.motif_recall >= 0.8 and elapsed < 20 * 60
    report(4, ok, (
        f"BA-2Motifs GCN test accuracy {acc:.3f} (>=0.95); SubgraphX "
        f"(M=20, T=100, N_min=5, L=3) mean motif recall {ev.motif_recall:.3f} "
        f"(>=0.8) on 20 correctly predicted test graphs; runtime {elapsed:.0f}s (<1200s)"
    ))


def test_criterion_5_scorer_ordering(ba2_workspace, ba2_mc_explained):
    ws = ba2_workspace
    t0 = time.monotonic()
    common = dict(
        model=str(ws["root"] / "model.json"), dataset=ws["gen"].dataset_path,
        graphs=ws["picks"], samples=100, nmin=5, iterations=20,
        prune="low2high", prune_k=12, seed=0, workers=4,
    )
    direct_dir = str(ws["root"] / "ex_direct")
    full_dir = str(ws["root"] / "ex_full")
    run_explain(ExplainRequest(out_dir=direct_dir, scorer="direct",
                               hops=3, **{**common, "lambda": 10.0}))
    run_explain(ExplainRequest(out_dir=full_dir, scorer="shapley-mc",
                               hops="inf", **{**common, "lambda": 10.0}))

    def fid(path):
        ev = run_eval(EvalRequest(
            model=str(ws["root"] / "model.json"), dataset=ws["gen"].dataset_path,
            explanations=path, sizes=[5],
        ))
        return ev.curve[0].fidelity

    f_mc = fid(ba2_mc_explained["dir"])
    f_direct = fid(direct_dir)
    f_full = fid(full_dir)
    elapsed = time.monotonic() - t0
    gap = abs(f_mc - f_full)
    ok = f_mc >= f_direct and gap <= 0.05 and elapsed < 30 * 60
    report(5, ok, (
        f"size-5 fidelity: shapley-mc {f_mc:.4f} >= direct {f_direct:.4f}; "
        f"|reduced - full-player-set| = {gap:.4f} (<=0.05); runtime {elapsed:.0f}s (<1800s)"
    ))


# ---------------------------------------------------------------------- 6


def test_criterion_6_search_oracle():
    t0 = time.monotonic()
    wins = 0
    details = []
    for seed in range(20):
        rng = np.random.default_rng((100, seed))
        n = int(rng.integers(8, 11))
        base = gen_ba(n, 1, seed=(7, seed))
        edges = set(base.edges)
        while len(edges) < n + 1:
            u, v = rng.integers(0, n, 2)
            if u != v:
                edges.add((min(int(u), int(v)), max(int(u), int(v))))
        g = Graph(n, tuple(sorted(edges)), rng.normal(size=(n, 4)))
        model = init_model("gcn", 4, [6, 6], 3, "mean", seed=seed)
        scorer = ScorerConfig("shapley-exact", hops=2)
        cfg = SearchConfig(
            iterations=500, n_min=3, exploration=10.0,
            strategy=PruneStrategy("low2high", None), scorer=scorer, seed=seed,
        )
        ex = run_search(model, g, cfg)
        _, bf_score = brute_force_best(model, g, 3, scorer)
        if ex.score >= 0.95 * bf_score:
            wins += 1
        else:
            details.append(f"seed {seed}: leaf {ex.score:.5f} < 0.95*{bf_score:.5f}")
    elapsed = time.monotonic() - t0
    ok = wins >= 18 and elapsed < 10 * 60
    report(6, ok, (
        f"exact-scoring search (unlimited k, M=500) reached >=0.95 x brute-force "
        f"score on {wins}/20 seeds (>=18); runtime {elapsed:.0f}s (<600s)"
        + ("; misses: " + "; ".join(details) if details else "")
    ))


# ---------------------------------------------------------------------- 7


def test_criterion_7_node_classification(tmp_path_factory):
    t0 = time.monotonic()
    root = tmp_path_factory.mktemp("bashape")
    gen = run_gen(GenRequest(dataset="bashape", out_dir=str(root), seed=0))
    tr = run_train(TrainRequest(
        dataset=gen.dataset_path, out=str(root / "model.json"),
        model_type="gcn", task="node", hidden_dims=[32, 32, 32, 32],
        epochs=2500, learning_rate=0.5, seed=0, init="degree-basis",
    ))
    model = load_weights(root / "model.json")
    records = read_dataset(gen.dataset_path)
    truth = read_ground_truth(gen.ground_truth_path)
    _, _, test_recs = split_records(records, 0)
    preds = predict_batch(model, [r.graph for r in test_recs])
    motif_correct = [
        r for r, p in zip(test_recs, preds)
        if p.predicted_class == r.graph.label and r.graph.label != 0
    ][:10]
    picks = ",".join(r.graph_id for r in motif_correct)
    run_explain(ExplainRequest(
        model=str(root / "model.json"), dataset=gen.dataset_path,
        out_dir=str(root / "ex"), graphs=picks, task="node", scorer="shapley-mc",
        samples=100, hops=3, nmin=5, iterations=20, prune="high2low", prune_k=12,
        seed=0, workers=2, **{"lambda": 10.0},
    ))
    docs = sorted((root / "ex").glob("*.json"))
    recalls = []
    for path in docs:
        doc = json.loads(path.read_text())
        recalls.append(motif_recall(doc["explanation_nodes"], truth[doc["graph_id"]]["nodes"]))
    mean_recall = float(np.mean(recalls))
    elapsed = time.monotonic() - t0
    ok = tr.test_accuracy >= 0.90 and mean_recall >= 0.7
    report(7, ok, (
        f"BA-Shape GCN test accuracy {tr.test_accuracy:.3f} (>=0.90); mean motif "
        f"recall {mean_recall:.3f} (>=0.7) on {len(recalls)} correctly predicted "
        f"motif nodes; runtime {elapsed:.0f}s"
    ))


# ---------------------------------------------------------------------- 8


def test_criterion_8_cli_determinism(tmp_path_factory):
    t0 = time.monotonic()
    runner = CliRunner()
    roots = [tmp_path_factory.mktemp(f"det{i}") for i in range(2)]
    workers = ["1", "3"]
    for root, w in zip(roots, workers):
        res = runner.invoke(cli_main, [
            "gen", "--dataset", "ba2motifs", "--num-graphs", "10",
            "--seed", "3", "--out-dir", str(root),
        ])
        assert res.exit_code == 0, res.output
        res = runner.invoke(cli_main, [
            "train", "--dataset", str(root / "ba2motifs.jsonl"),
            "--out", str(root / "model.json"), "--hidden-dims", "8,8,8",
            "--epochs", "200", "--learning-rate", "0.5", "--seed", "1",
        ])
        assert res.exit_code == 0, res.output
        res = runner.invoke(cli_main, [
            "explain", "--model", str(root / "model.json"),
            "--dataset", str(root / "ba2motifs.jsonl"),
            "--out-dir", str(root / "ex"), "--graphs", "all",
            "--samples", "16", "--iterations", "5", "--seed", "7",
            "--workers", w,
        ])
        assert res.exit_code == 0, res.output
        res = runner.invoke(cli_main, [
            "eval", "--model", str(root / "model.json"),
            "--dataset", str(root / "ba2motifs.jsonl"),
            "--explanations", str(root / "ex"), "--sizes", "3,5",
            "--out-dir", str(root / "ev"),
            "--ground-truth", str(root / "ba2motifs_ground_truth.json"),
        ])
        assert res.exit_code == 0, res.output
    identical = []
    for rel in ["ba2motifs.jsonl", "ba2motifs_ground_truth.json", "model.json",
                "ev/metrics.json", "ev/curve.csv", "ev/curve.json"]:
        identical.append((roots[0] / rel).read_bytes() == (roots[1] / rel).read_bytes())
    for doc in sorted((roots[0] / "ex").glob("*.json")):
        identical.append(doc.read_bytes() == (roots[1] / "ex" / doc.name).read_bytes())
    elapsed = time.monotonic() - t0
    ok = all(identical)
    report(8, ok, (
        f"gen/train/explain/eval outputs byte-identical across repeated runs with "
        f"workers 1 vs 3 ({sum(identical)}/{len(identical)} files); runtime {elapsed:.0f}s"
    ))
