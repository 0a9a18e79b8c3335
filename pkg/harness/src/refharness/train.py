"""Training in torch, exporting to the shared weight-file format.

The constant-feature synthetic datasets leave gradient training of the
aggregation layers without signal (the first aggregation collapses each node
to one scalar), so the graph layers are built as a fixed hinge bank over
that scalar (thresholds at data quantiles, adjacent-channel differencing,
identity passes) and the linear classifier is fit with Adam over
standardized representations, which then fold back into plain weights.
"""

from __future__ import annotations

import numpy as np
import torch

from .dataio import GraphRecord, read_dataset
from .model import TorchModel, normalized_adjacency
from .weights import save_document


def _rows(t: torch.Tensor) -> list:
    return [[float(x) for x in row] for row in t]


def _vec(t: torch.Tensor) -> list:
    return [float(x) for x in t]


def split_records(records, seed: int):
    """80/10/10 split; mirrors the engine's convention (seeded shuffle)."""
    rng = np.random.default_rng((seed, 0x5B17))
    order = rng.permutation(len(records))
    n_train = int(0.8 * len(records))
    n_val = int(0.1 * len(records))
    pick = lambda idx: [records[i] for i in sorted(idx)]
    return (
        pick(order[:n_train]),
        pick(order[n_train : n_train + n_val]),
        pick(order[n_train + n_val :]),
    )


def basis_layers(records, input_dim: int, width: int, depth: int):
    """Hinge bank over normalized aggregation sums, bin differencing, then
    identity layers; returns the weight-file layer documents."""
    w1 = torch.full((input_dim, width), 1.0 / input_dim, dtype=torch.float64)
    scalars = []
    seen = set()
    for rec in records:
        key = (rec.num_nodes, tuple(rec.edges))
        if key in seen:
            continue
        seen.add(key)
        prop = normalized_adjacency(rec)
        x = torch.tensor(rec.features, dtype=torch.float64)
        scalars.append((prop @ x @ w1[:, :1]).ravel())
    s = torch.cat(scalars).numpy()
    thetas = np.quantile(s, np.linspace(0.02, 0.98, width))
    layers = [{"weight": _rows(w1), "bias": [-float(t) for t in thetas]}]
    if depth >= 2:
        bin_diff = torch.eye(width, dtype=torch.float64)
        for c in range(width - 1):
            bin_diff[c + 1, c] = -1.0
        layers.append({"weight": _rows(bin_diff), "bias": [0.0] * width})
    for _ in range(depth - 2):
        layers.append({"weight": _rows(torch.eye(width, dtype=torch.float64)), "bias": [0.0] * width})
    return layers


def _representations(model: TorchModel, records, node_keep=None):
    reps = []
    labels = []
    for rec in records:
        x = torch.tensor(rec.features, dtype=torch.float64)
        if node_keep is not None:
            keep = torch.tensor(node_keep(rec), dtype=torch.float64)
            x = x * keep[:, None]
        h = model.node_embeddings(rec, x)
        if model.readout == "none":
            reps.append(h[rec.target_node])
        elif model.readout == "max":
            reps.append(h.max(dim=0).values)
        else:
            reps.append(h.mean(dim=0))
        labels.append(rec.label)
    return torch.stack(reps), torch.tensor(labels)


def train_and_export(
    dataset_path,
    out_path,
    arch: str = "gcn",
    hidden: int = 20,
    depth: int = 3,
    readout: str = "max",
    task: str = "graph",
    epochs: int = 400,
    learning_rate: float = 0.05,
    seed: int = 0,
    occlusion_variants: int = 24,
):
    """Train on the shared dataset format and write a shared weight file.

    Returns (weight_document, metrics dict).
    """
    if arch != "gcn":
        raise ValueError("the parity harness trains gcn models")
    torch.manual_seed(seed)
    records = read_dataset(dataset_path)
    if task == "node":
        readout = "none"
    train_recs, val_recs, test_recs = split_records(records, seed)
    num_classes = max(r.label for r in records if r.label is not None) + 1
    input_dim = records[0].features.shape[1]

    doc = {
        "format_version": "1",
        "model_type": "gcn",
        "input_dim": input_dim,
        "num_classes": num_classes,
        "readout": readout,
        "layers": basis_layers(train_recs, input_dim, hidden, depth),
        "classifier": {
            "weight": [[0.0] * num_classes for _ in range(hidden)],
            "bias": [0.0] * num_classes,
        },
    }
    model = TorchModel(doc)

    rng = np.random.default_rng((seed, 0x0CC1))
    reps, labels = _representations(model, train_recs)
    all_reps = [reps]
    all_labels = [labels]
    if task == "graph":
        for _ in range(occlusion_variants):
            keep_p = rng.uniform(0.2, 0.9)
            masks = {
                rec.graph_id: (rng.random(rec.num_nodes) < keep_p).astype(np.float64)
                for rec in train_recs
            }
            r, l = _representations(model, train_recs, node_keep=lambda rec: masks[rec.graph_id])
            all_reps.append(r)
            all_labels.append(l)
    reps = torch.cat(all_reps)
    labels = torch.cat(all_labels)

    mu = reps.mean(dim=0)
    sd = reps.std(dim=0, unbiased=False)
    sd = torch.clamp(sd, min=max(float(sd.max()) * 1e-3, 1e-12))
    z = (reps - mu) / sd
    wh = torch.zeros((hidden, num_classes), dtype=torch.float64, requires_grad=True)
    bh = torch.zeros(num_classes, dtype=torch.float64, requires_grad=True)
    opt = torch.optim.Adam([wh, bh], lr=learning_rate)
    for _ in range(epochs):
        opt.zero_grad()
        loss = torch.nn.functional.cross_entropy(z @ wh + bh, labels)
        loss.backward()
        opt.step()
    with torch.no_grad():
        folded_w = wh / sd[:, None]
        folded_b = bh - (mu / sd) @ wh
    doc["classifier"] = {"weight": _rows(folded_w), "bias": _vec(folded_b)}
    save_document(doc, out_path)

    final = TorchModel(doc)

    def accuracy(recs):
        if not recs:
            return None
        hits = sum(1 for r in recs if final.predict_class(r) == r.label)
        return hits / len(recs)

    metrics = {
        "train_accuracy": accuracy(train_recs),
        "val_accuracy": accuracy(val_recs),
        "test_accuracy": accuracy(test_recs),
        "final_loss": float(loss.detach()),
    }
    return doc, metrics
