"""Pipeline operations behind the service endpoints.

Each function takes a validated request model, does the work, writes any
output files, and returns a response model. All outputs are byte-deterministic
for a fixed request (including across worker counts).
"""

from __future__ import annotations

import json
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import datagen
from .dataio import DatasetRecord, read_dataset, read_ground_truth, write_dataset, write_ground_truth
from .errors import InputError
from .graph import Graph, PruneStrategy, nodeset
from .mcts import Explanation, ScorerConfig, SearchConfig, run_search
from .metrics import curve_to_csv, fidelity, motif_recall, sparsity, sparsity_fidelity_curve
from .model import ModelSpec
from .schemas import (
    CurveRow,
    EvalRequest,
    EvalResponse,
    ExplainRequest,
    ExplainResponse,
    GenRequest,
    GenResponse,
    PredictRecord,
    PredictRequest,
    PredictResponse,
    TrainRequest,
    TrainResponse,
)
from .training import evaluate_accuracy, init_model, predict_batch, train
from .weights import load_weights, save_weights

_SPLIT_SALT = 0x5B17  # keeps the 80/10/10 shuffle stream separate from training


def dump_doc(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def run_gen(req: GenRequest) -> GenResponse:
    out_dir = Path(req.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    warnings = []
    if req.dataset == "ba2motifs":
        records, truth = datagen.gen_ba2motifs(req.num_graphs, req.seed)
        if req.num_graphs % 2:
            warnings.append("odd num_graphs: labels are near-balanced, not exactly balanced")
    else:
        records, truth = datagen.gen_bashape(req.seed)
    dataset_path = out_dir / f"{req.dataset}.jsonl"
    truth_path = out_dir / f"{req.dataset}_ground_truth.json"
    write_dataset(dataset_path, records)
    write_ground_truth(truth_path, truth)
    counts: dict = {}
    for rec in records:
        counts[rec.graph.label] = counts.get(rec.graph.label, 0) + 1
    return GenResponse(
        dataset_path=str(dataset_path),
        ground_truth_path=str(truth_path),
        num_records=len(records),
        label_counts={int(k): v for k, v in sorted(counts.items())},
        warnings=warnings,
    )


def split_records(records: Sequence[DatasetRecord], seed: int):
    """Deterministic 80/10/10 train/val/test split."""
    rng = np.random.default_rng((seed, _SPLIT_SALT))
    order = rng.permutation(len(records))
    n_train = int(0.8 * len(records))
    n_val = int(0.1 * len(records))
    train_idx = sorted(order[:n_train])
    val_idx = sorted(order[n_train : n_train + n_val])
    test_idx = sorted(order[n_train + n_val :])
    pick = lambda idx: [records[i] for i in idx]
    return pick(train_idx), pick(val_idx), pick(test_idx)


def run_train(req: TrainRequest) -> TrainResponse:
    records = read_dataset(req.dataset)
    if not records:
        raise InputError(f"dataset {req.dataset} is empty")
    readout = "none" if req.task == "node" else req.readout
    num_classes = max(r.graph.label for r in records if r.graph.label is not None) + 1
    input_dim = records[0].graph.feature_dim
    arch = init_model(req.model_type, input_dim, req.hidden_dims, num_classes, readout, req.seed)
    scheme = req.init
    if scheme == "auto":
        scheme = "degree-basis" if req.model_type == "gcn" else "glorot"
    train_recs, val_recs, test_recs = split_records(records, req.seed)
    model = train(
        arch,
        [r.graph for r in train_recs],
        epochs=req.epochs,
        learning_rate=req.learning_rate,
        seed=req.seed,
        scheme=scheme,
        occlusion_variants=req.occlusion_variants,
    )
    from .training import build_batch, batch_loss

    final_loss = batch_loss(model, build_batch(model, [r.graph for r in train_recs]))
    save_weights(model, req.out)
    return TrainResponse(
        weights_path=str(req.out),
        train_accuracy=evaluate_accuracy(model, [r.graph for r in train_recs]),
        val_accuracy=evaluate_accuracy(model, [r.graph for r in val_recs]) if val_recs else None,
        test_accuracy=evaluate_accuracy(model, [r.graph for r in test_recs]) if test_recs else None,
        num_train=len(train_recs),
        num_val=len(val_recs),
        num_test=len(test_recs),
        final_epoch_loss=final_loss,
    )


def _select_records(records: Sequence[DatasetRecord], spec: str) -> list:
    if spec.strip() == "all":
        return list(records)
    wanted = [s.strip() for s in spec.split(",") if s.strip()]
    by_id = {r.graph_id: r for r in records}
    missing = [w for w in wanted if w not in by_id]
    if missing:
        raise InputError(f"record ids not in dataset: {missing}")
    return [by_id[w] for w in wanted]


def _instance_seed(seed: int, graph_id: str) -> int:
    crc = zlib.crc32(graph_id.encode("utf-8"))
    ss = np.random.SeedSequence([seed & 0x7FFFFFFF, crc])
    return int(ss.generate_state(1, np.uint64)[0])


def _hops_value(hops) -> float:
    return math.inf if hops == "inf" else float(hops)


def explanation_document(
    graph_id: str,
    task: str,
    target_node: Optional[int],
    explanation: Explanation,
    req: ExplainRequest,
    instance_seed: int,
) -> dict:
    return {
        "graph_id": graph_id,
        "task": task,
        "target_node": target_node,
        "predicted_class": explanation.predicted_class,
        "predicted_probability": explanation.predicted_probability,
        "explanation_nodes": list(explanation.nodes),
        "score": explanation.score,
        "scorer": {"kind": req.scorer, "samples": req.samples, "hops": req.hops},
        "sparsity": explanation.sparsity,
        "per_size": [
            {"size": size, "nodes": list(nodes), "score": score}
            for size, (nodes, score) in sorted(explanation.per_size.items())
        ],
        "config": {
            "iterations": req.iterations,
            "nmin": req.nmin,
            "lambda": req.exploration,
            "prune": req.prune,
            "prune_k": req.prune_k,
            "seed": req.seed,
            "instance_seed": instance_seed,
        },
        "diagnostics": explanation.diagnostics,
    }


def _explain_one(model: ModelSpec, rec: DatasetRecord, req: ExplainRequest):
    graph = rec.graph
    if req.task == "node":
        target = req.target_node if req.target_node is not None else graph.target_node
        if target is None:
            raise InputError(f"record {rec.graph_id}: node task requires a target node")
        if target != graph.target_node:
            graph = Graph(
                num_nodes=graph.num_nodes,
                edges=graph.edges,
                features=graph.features,
                label=graph.label,
                target_node=target,
            )
    else:
        target = None
    instance_seed = _instance_seed(req.seed, rec.graph_id)
    config = SearchConfig(
        iterations=req.iterations,
        n_min=req.nmin,
        exploration=req.exploration,
        strategy=PruneStrategy(req.prune, req.prune_k),
        scorer=ScorerConfig(req.scorer, req.samples, _hops_value(req.hops)),
        seed=instance_seed,
    )
    explanation = run_search(model, graph, config, task=req.task)
    return explanation_document(rec.graph_id, req.task, target, explanation, req, instance_seed)


def run_explain(req: ExplainRequest) -> ExplainResponse:
    model = load_weights(req.model)
    if req.task == "node" and model.readout != "none":
        raise InputError("node task requires a model trained with readout 'none'")
    if req.task == "graph" and model.readout == "none":
        raise InputError("graph task requires a model with a graph readout")
    records = _select_records(read_dataset(req.dataset), req.graphs)
    out_dir = Path(req.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def work(rec: DatasetRecord):
        return rec.graph_id, _explain_one(model, rec, req)

    results = {}
    failures = []
    if req.workers > 1:
        with ThreadPoolExecutor(max_workers=req.workers) as pool:
            futures = {pool.submit(work, rec): rec.graph_id for rec in records}
            for fut, gid in futures.items():
                try:
                    results[gid] = fut.result()[1]
                except Exception as e:  # per-instance isolation
                    failures.append({"graph_id": gid, "error": str(e)})
    else:
        for rec in records:
            try:
                results[rec.graph_id] = work(rec)[1]
            except Exception as e:
                failures.append({"graph_id": rec.graph_id, "error": str(e)})
    documents = []
    for gid in sorted(results):
        path = out_dir / f"{gid}.json"
        path.write_text(dump_doc(results[gid]), encoding="utf-8")
        documents.append(str(path))
    failures.sort(key=lambda f: f["graph_id"])
    return ExplainResponse(
        documents=documents, explained=sorted(results), failures=failures
    )


def run_eval(req: EvalRequest) -> EvalResponse:
    model = load_weights(req.model)
    records = {r.graph_id: r for r in read_dataset(req.dataset)}
    doc_paths = sorted(Path(req.explanations).glob("*.json"))
    if not doc_paths:
        raise InputError(f"no explanation documents in {req.explanations}")
    docs = [json.loads(p.read_text(encoding="utf-8")) for p in doc_paths]
    missing = [d["graph_id"] for d in docs if d["graph_id"] not in records]
    if missing:
        raise InputError(f"explanations reference unknown records: {missing}")
    docs.sort(key=lambda d: d["graph_id"])
    ids = [d["graph_id"] for d in docs]
    graphs = [records[i].graph for i in ids]
    masks = [nodeset(d["explanation_nodes"]) for d in docs]
    fid = fidelity(model, graphs, masks)
    spars = sparsity(masks, graphs)
    per_size_maps = [
        {int(e["size"]): tuple(e["nodes"]) for e in d.get("per_size", [])} for d in docs
    ]
    sizes = sorted(set(req.sizes)) if req.sizes else sorted(
        {s for m in per_size_maps for s in m}
    )
    points = sparsity_fidelity_curve(model, graphs, per_size_maps, sizes, ids=ids)
    recall = None
    if req.ground_truth:
        truth = read_ground_truth(req.ground_truth)
        values = [
            motif_recall(d["explanation_nodes"], truth[i]["nodes"])
            for i, d in zip(ids, docs)
            if i in truth
        ]
        if values:
            recall = sum(values) / len(values)
    rows = [
        CurveRow(
            size=p.size,
            sparsity=p.sparsity,
            fidelity=p.fidelity,
            n_graphs=p.n_graphs,
            fallbacks=list(p.fallbacks),
        )
        for p in points
    ]
    resp = EvalResponse(
        fidelity=fid,
        sparsity=spars,
        n_graphs=len(graphs),
        curve=rows,
        motif_recall=recall,
    )
    if req.out_dir:
        out_dir = Path(req.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / "curve.csv"
        csv_path.write_text(curve_to_csv(points), encoding="utf-8")
        json_path = out_dir / "curve.json"
        json_path.write_text(
            dump_doc([r.model_dump() for r in rows]), encoding="utf-8"
        )
        metrics_path = out_dir / "metrics.json"
        metrics_path.write_text(
            dump_doc(
                {
                    "fidelity": fid,
                    "sparsity": spars,
                    "n_graphs": len(graphs),
                    "motif_recall": recall,
                }
            ),
            encoding="utf-8",
        )
        resp.curve_csv_path = str(csv_path)
        resp.curve_json_path = str(json_path)
        resp.metrics_path = str(metrics_path)
    return resp


def run_predict(req: PredictRequest) -> PredictResponse:
    model = load_weights(req.model)
    records = _select_records(read_dataset(req.dataset), req.graphs)
    records = sorted(records, key=lambda r: r.graph_id)
    preds = predict_batch(model, [r.graph for r in records])
    rows = [
        PredictRecord(
            graph_id=rec.graph_id,
            logits=[float(x) for x in p.logits],
            probabilities=[float(x) for x in p.probabilities],
            predicted_class=p.predicted_class,
            label=rec.graph.label,
        )
        for rec, p in zip(records, preds)
    ]
    out_path = None
    if req.out:
        out_path = str(req.out)
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        Path(out_path).write_text(
            dump_doc([r.model_dump() for r in rows]), encoding="utf-8"
        )
    return PredictResponse(records=rows, out_path=out_path)
