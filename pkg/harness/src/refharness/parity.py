"""Logit parity between this torch implementation and the main engine."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import torch

from .dataio import read_dataset
from .model import TorchModel
from .weights import load_document

DEFAULT_THRESHOLD = 1e-4


def check_parity(weight_file, dataset_path, primary_logit_dump, threshold: float = DEFAULT_THRESHOLD) -> dict:
    """Compare this implementation's logits against the engine's dump.

    The dump is the engine's predict output: a JSON list of records with
    graph_id and logits. Every dumped graph is compared; the report lists
    each one with its max absolute logit difference.
    """
    doc = load_document(weight_file)
    model = TorchModel(doc)
    records = {r.graph_id: r for r in read_dataset(dataset_path)}
    dump = json.loads(Path(primary_logit_dump).read_text(encoding="utf-8"))
    rows = []
    for entry in dump:
        gid = entry["graph_id"]
        if gid not in records:
            raise ValueError(f"dumped graph {gid} not present in dataset")
        ours = model.logits(records[gid])
        theirs = torch.tensor(entry["logits"], dtype=torch.float64)
        if ours.shape != theirs.shape:
            rows.append({"graph_id": gid, "max_abs_diff": None, "passed": False,
                         "error": f"shape mismatch {tuple(ours.shape)} vs {tuple(theirs.shape)}"})
            continue
        diff = float((ours - theirs).abs().max())
        rows.append({"graph_id": gid, "max_abs_diff": diff, "passed": diff <= threshold})
    rows.sort(key=lambda r: r["graph_id"])
    digest = hashlib.sha256(Path(weight_file).read_bytes()).hexdigest()
    return {
        "model_hash": digest,
        "threshold": threshold,
        "num_graphs": len(rows),
        "num_failed": sum(1 for r in rows if not r["passed"]),
        "passed": all(r["passed"] for r in rows) and bool(rows),
        "graphs": rows,
    }


def write_report(report: dict, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
