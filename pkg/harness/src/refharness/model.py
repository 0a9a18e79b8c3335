"""Torch forward pass for the shared GCN / GIN definitions.

Everything runs in float64; the math mirrors the producing engine: GCN
aggregates with D^-1/2 (A+I) D^-1/2, GIN sums raw neighbors into a two-layer
perceptron, ReLU activations throughout, linear classifier after a max/mean
readout (graph tasks) or on the target node (node tasks).
"""

from __future__ import annotations

import torch

from .dataio import GraphRecord


def normalized_adjacency(rec: GraphRecord) -> torch.Tensor:
    n = rec.num_nodes
    a = torch.zeros((n, n), dtype=torch.float64)
    for u, v in rec.edges:
        a[u, v] = 1.0
        a[v, u] = 1.0
    a += torch.eye(n, dtype=torch.float64)
    d = a.sum(dim=1)
    inv = d.rsqrt()
    return a * (inv[:, None] * inv[None, :])


def raw_adjacency(rec: GraphRecord) -> torch.Tensor:
    n = rec.num_nodes
    a = torch.zeros((n, n), dtype=torch.float64)
    for u, v in rec.edges:
        a[u, v] = 1.0
        a[v, u] = 1.0
    return a


class TorchModel:
    """Inference-only model materialized from a weight-file document."""

    def __init__(self, doc: dict):
        self.model_type = doc["model_type"]
        self.readout = doc["readout"]
        self.input_dim = int(doc["input_dim"])
        self.num_classes = int(doc["num_classes"])
        self.layers = []
        as_t = lambda a: torch.tensor(a, dtype=torch.float64)
        for i, ld in enumerate(doc["layers"]):
            if self.model_type == "gcn":
                layer = {"weight": as_t(ld["weight"])}
                if ld.get("bias") is not None:
                    layer["bias"] = as_t(ld["bias"])
            else:
                layer = {
                    "mlp_w1": as_t(ld["mlp_w1"]),
                    "mlp_b1": as_t(ld["mlp_b1"]),
                    "mlp_w2": as_t(ld["mlp_w2"]),
                    "mlp_b2": as_t(ld["mlp_b2"]),
                    "eps": float(ld.get("eps", 0.0)),
                }
            self.layers.append(layer)
        dims = [self.layers[0]["weight" if self.model_type == "gcn" else "mlp_w1"].shape[0]]
        for layer in self.layers:
            key = "weight" if self.model_type == "gcn" else "mlp_w2"
            dims.append(layer[key].shape[1])
        if dims[0] != self.input_dim:
            raise ValueError("declared input_dim does not match layer 0")
        self.classifier_w = as_t(doc["classifier"]["weight"])
        self.classifier_b = as_t(doc["classifier"]["bias"])
        if self.classifier_w.shape[1] != self.num_classes:
            raise ValueError("declared num_classes does not match classifier")

    def node_embeddings(self, rec: GraphRecord, x: torch.Tensor = None) -> torch.Tensor:
        if x is None:
            x = torch.tensor(rec.features, dtype=torch.float64)
        if self.model_type == "gcn":
            prop = normalized_adjacency(rec)
            for layer in self.layers:
                z = prop @ x @ layer["weight"]
                if "bias" in layer:
                    z = z + layer["bias"]
                x = torch.relu(z)
        else:
            adj = raw_adjacency(rec)
            for layer in self.layers:
                z0 = (1.0 + layer["eps"]) * x + adj @ x
                h = torch.relu(z0 @ layer["mlp_w1"] + layer["mlp_b1"])
                x = torch.relu(h @ layer["mlp_w2"] + layer["mlp_b2"])
        return x

    def logits(self, rec: GraphRecord) -> torch.Tensor:
        x = self.node_embeddings(rec)
        if self.readout == "none":
            if rec.target_node is None:
                raise ValueError(f"record {rec.graph_id} has no target_node")
            h = x[rec.target_node]
        elif self.readout == "max":
            h = x.max(dim=0).values
        else:
            h = x.mean(dim=0)
        return h @ self.classifier_w + self.classifier_b

    def predict_class(self, rec: GraphRecord) -> int:
        return int(torch.argmax(self.logits(rec)))
