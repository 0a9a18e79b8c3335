"""Deterministic forward inference for small GCN / GIN classifiers.

Models are plain arrays; a forward pass is a chain of dense matmuls. Feature
masking (zero-padding) only ever replaces node input features — the graph
structure, and hence the normalized adjacency, is never altered by a mask.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .errors import InputError
from .graph import Graph

READOUTS = ("max", "mean", "none")


def _as_matrix(a, name: str) -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise InputError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InputError(f"{name} has non-finite entries")
    m = m.copy()
    m.setflags(write=False)
    return m


def _as_vector(a, name: str) -> np.ndarray:
    v = np.asarray(a, dtype=np.float64)
    if v.ndim != 1:
        raise InputError(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InputError(f"{name} has non-finite entries")
    v = v.copy()
    v.setflags(write=False)
    return v


@dataclass(frozen=True)
class GCNLayer:
    weight: np.ndarray
    bias: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "weight", _as_matrix(self.weight, "gcn weight"))
        if self.bias is not None:
            b = _as_vector(self.bias, "gcn bias")
            if b.shape[0] != self.weight.shape[1]:
                raise InputError("gcn bias length does not match weight columns")
            object.__setattr__(self, "bias", b)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[1]


@dataclass(frozen=True)
class GINLayer:
    """Sum-aggregation layer with a two-layer perceptron transform.

    h' = MLP((1 + eps) * h + sum of neighbor h); eps is fixed, not trained.
    """

    mlp_w1: np.ndarray
    mlp_b1: np.ndarray
    mlp_w2: np.ndarray
    mlp_b2: np.ndarray
    eps: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "mlp_w1", _as_matrix(self.mlp_w1, "gin mlp_w1"))
        object.__setattr__(self, "mlp_b1", _as_vector(self.mlp_b1, "gin mlp_b1"))
        object.__setattr__(self, "mlp_w2", _as_matrix(self.mlp_w2, "gin mlp_w2"))
        object.__setattr__(self, "mlp_b2", _as_vector(self.mlp_b2, "gin mlp_b2"))
        if self.mlp_b1.shape[0] != self.mlp_w1.shape[1]:
            raise InputError("gin mlp_b1 length does not match mlp_w1 columns")
        if self.mlp_w2.shape[0] != self.mlp_w1.shape[1]:
            raise InputError("gin mlp_w2 rows do not match mlp_w1 columns")
        if self.mlp_b2.shape[0] != self.mlp_w2.shape[1]:
            raise InputError("gin mlp_b2 length does not match mlp_w2 columns")
        if not np.isfinite(self.eps):
            raise InputError("gin eps must be finite")

    @property
    def in_dim(self) -> int:
        return self.mlp_w1.shape[0]

    @property
    def out_dim(self) -> int:
        return self.mlp_w2.shape[1]


Layer = Union[GCNLayer, GINLayer]


@dataclass(frozen=True)
class ModelSpec:
    """Layered GNN: aggregation layers, optional readout, linear classifier."""

    model_type: str  # "gcn" | "gin"
    layers: tuple
    readout: str  # "max" | "mean" for graph classification, "none" for node tasks
    classifier_weight: np.ndarray
    classifier_bias: np.ndarray

    def __post_init__(self):
        if self.model_type not in ("gcn", "gin"):
            raise InputError(f"unknown model_type {self.model_type!r}")
        if self.readout not in READOUTS:
            raise InputError(f"unknown readout {self.readout!r}")
        if len(self.layers) < 1:
            raise InputError("model needs at least one layer")
        expected = GCNLayer if self.model_type == "gcn" else GINLayer
        for i, layer in enumerate(self.layers):
            if not isinstance(layer, expected):
                raise InputError(f"layer {i} is not a {expected.__name__}")
            if i > 0 and layer.in_dim != self.layers[i - 1].out_dim:
                raise InputError(
                    f"layer {i} input dim {layer.in_dim} does not chain with "
                    f"layer {i - 1} output dim {self.layers[i - 1].out_dim}"
                )
        object.__setattr__(self, "layers", tuple(self.layers))
        w = _as_matrix(self.classifier_weight, "classifier weight")
        b = _as_vector(self.classifier_bias, "classifier bias")
        if w.shape[0] != self.layers[-1].out_dim:
            raise InputError(
                f"classifier input dim {w.shape[0]} does not match final layer "
                f"output dim {self.layers[-1].out_dim}"
            )
        if b.shape[0] != w.shape[1]:
            raise InputError("classifier bias length does not match weight columns")
        object.__setattr__(self, "classifier_weight", w)
        object.__setattr__(self, "classifier_bias", b)

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def num_classes(self) -> int:
        return self.classifier_weight.shape[1]


@dataclass(frozen=True)
class Prediction:
    logits: np.ndarray
    probabilities: np.ndarray
    predicted_class: int


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def normalize_adjacency(g: Graph, active=None) -> np.ndarray:
    """D^{-1/2} (A + I) D^{-1/2} over the full graph structure.

    ``active`` is accepted for interface symmetry with feature masking and is
    ignored: masking replaces features, never edges, so the operator is the
    same for every mask. Isolated nodes keep a normalized self-entry of 1.
    """
    a_hat = g.adjacency()
    np.fill_diagonal(a_hat, 1.0)
    d = a_hat.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(d)
    # scale by the symmetric outer product so the result is exactly symmetric
    return a_hat * (inv_sqrt[:, None] * inv_sqrt[None, :])


def _relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def apply_layers(model: ModelSpec, prop, x: np.ndarray) -> np.ndarray:
    """Run the aggregation layers on node features.

    ``prop`` is the precomputed propagation operator: the normalized adjacency
    for GCN, the raw adjacency for GIN. ``x`` is (n, d) or batched (B, n, d).
    """
    for layer in model.layers:
        agg = prop @ x if not sp.issparse(prop) else _sparse_apply(prop, x)
        if isinstance(layer, GCNLayer):
            z = agg @ layer.weight
            if layer.bias is not None:
                z = z + layer.bias
            x = _relu(z)
        else:
            z0 = (1.0 + layer.eps) * x + agg
            h = _relu(z0 @ layer.mlp_w1 + layer.mlp_b1)
            x = _relu(h @ layer.mlp_w2 + layer.mlp_b2)
    return x


def _sparse_apply(prop, x: np.ndarray) -> np.ndarray:
    if x.ndim == 2:
        return prop @ x
    b, n, d = x.shape
    flat = np.ascontiguousarray(np.moveaxis(x, 0, 1)).reshape(n, b * d)
    out = prop @ flat
    return np.moveaxis(out.reshape(n, b, d), 0, 1)


def propagation_for(model_type: str, g: Graph, sparse: bool = False):
    dense = normalize_adjacency(g) if model_type == "gcn" else g.adjacency()
    return sp.csr_matrix(dense) if sparse else dense


def propagation_operator(model: ModelSpec, g: Graph, sparse: bool = False):
    return propagation_for(model.model_type, g, sparse)


def _masked_input(g: Graph, feature_mask) -> np.ndarray:
    x = g.features
    if feature_mask is None:
        return np.array(x)
    keep = np.zeros(g.num_nodes, dtype=np.float64)
    for n in feature_mask:
        if not (0 <= n < g.num_nodes):
            raise InputError(f"feature_mask node {n} out of range")
        keep[n] = 1.0
    return x * keep[:, None]


def readout_nodes(model: ModelSpec, x: np.ndarray) -> np.ndarray:
    if model.readout == "max":
        return np.max(x, axis=-2)
    if model.readout == "mean":
        return np.mean(x, axis=-2)
    raise InputError("node-classification model has no graph readout")


def forward(model: ModelSpec, g: Graph, feature_mask=None) -> Prediction:
    """Full forward pass; ``feature_mask`` keeps listed nodes, zeroing the rest.

    Graph mode (readout max/mean): readout over all nodes, then classifier.
    Node mode (readout none): classifier on the target node's embedding.
    """
    if g.feature_dim != model.input_dim:
        raise InputError(
            f"graph feature dim {g.feature_dim} does not match model input dim "
            f"{model.input_dim}"
        )
    x0 = _masked_input(g, feature_mask)
    prop = propagation_operator(model, g)
    x = apply_layers(model, prop, x0)
    if model.readout == "none":
        if g.target_node is None:
            raise InputError("node-classification forward requires graph.target_node")
        h = x[g.target_node]
    else:
        h = readout_nodes(model, x)
    logits = h @ model.classifier_weight + model.classifier_bias
    probs = softmax(logits)
    return Prediction(logits=logits, probabilities=probs, predicted_class=int(np.argmax(probs)))


class GraphEvaluator:
    """Repeated masked probability evaluation on one (model, graph) pair.

    Precomputes the propagation operator once and evaluates batches of
    feature masks in a single vectorized pass. ``focus`` selects node mode:
    probabilities of that node's prediction instead of the graph readout.
    """

    def __init__(self, model: ModelSpec, g: Graph, focus: Optional[int] = None):
        if g.feature_dim != model.input_dim:
            raise InputError("graph feature dim does not match model input dim")
        if focus is not None and not (0 <= focus < g.num_nodes):
            raise InputError(f"focus node {focus} out of range")
        if focus is None and model.readout == "none":
            raise InputError("node-classification evaluator requires a focus node")
        self.model = model
        self.graph = g
        self.focus = focus
        self.prop = propagation_operator(model, g, sparse=g.num_nodes >= 128)
        self.forward_count = 0

    def probs_for_masks(self, masks: np.ndarray) -> np.ndarray:
        """(B, n) 0/1 mask rows -> (B, num_classes) probabilities."""
        masks = np.asarray(masks, dtype=np.float64)
        if masks.ndim != 2 or masks.shape[1] != self.graph.num_nodes:
            raise InputError(f"mask batch has wrong shape {masks.shape}")
        x0 = masks[:, :, None] * self.graph.features[None, :, :]
        x = apply_layers(self.model, self.prop, x0)
        if self.focus is not None:
            h = x[:, self.focus, :]
        else:
            h = readout_nodes(self.model, x)
        logits = h @ self.model.classifier_weight + self.model.classifier_bias
        self.forward_count += masks.shape[0]
        return softmax(logits)
