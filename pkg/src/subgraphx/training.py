"""Full-batch gradient-descent training with analytic backpropagation.

Deliberately minimal: plain gradient descent (no momentum, no Adam), float64
throughout, deterministic for a given seed. A whole graph-classification
batch is laid out as one block-diagonal sparse propagation operator over the
concatenated nodes, so an epoch is a handful of flat matmuls.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InputError, TrainingDivergedError
from .graph import Graph
from .model import (
    GCNLayer,
    GINLayer,
    ModelSpec,
    Prediction,
    apply_layers,
    forward,
    propagation_for,
    propagation_operator,
    softmax,
)


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    s = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=shape)


def degree_basis_model(
    input_dim: int,
    width: int,
    depth: int,
    num_classes: int,
    readout: str,
    graphs: Sequence[Graph],
) -> ModelSpec:
    """GCN whose first layer is a hinge bank over the aggregation sums.

    With constant node features the first aggregation collapses every node to
    a single scalar (its normalized neighborhood sum), so learned layers see
    no usable gradient. Instead, the first layer thresholds that scalar at
    the training data's quantiles, the second layer differences adjacent
    hinge channels into bounded histogram bins of the aggregated
    neighborhood, and any further layers are identity passes whose
    aggregation widens the receptive field. Only the classifier is trained
    on top of these fixed features.
    """
    if depth < 1:
        raise InputError("depth must be >= 1")
    w1 = np.full((input_dim, width), 1.0 / input_dim)
    scalars = []
    seen = set()
    for g in graphs:
        key = structure_key(g)
        if key in seen:
            continue
        seen.add(key)
        prop = propagation_for("gcn", g, sparse=g.num_nodes >= 128)
        scalars.append(np.asarray(prop @ (g.features @ w1[:, :1])).ravel())
    s = np.concatenate(scalars)
    thetas = np.quantile(s, np.linspace(0.02, 0.98, width))
    layers = [GCNLayer(weight=w1, bias=-thetas)]
    if depth >= 2:
        bin_diff = np.eye(width)
        for c in range(width - 1):
            bin_diff[c + 1, c] = -1.0  # out_c = relu(agg_c - agg_{c+1})
        layers.append(GCNLayer(weight=bin_diff, bias=np.zeros(width)))
    for _ in range(depth - 2):
        layers.append(GCNLayer(weight=np.eye(width), bias=np.zeros(width)))
    return ModelSpec(
        model_type="gcn",
        layers=tuple(layers),
        readout=readout,
        classifier_weight=np.zeros((width, num_classes)),
        classifier_bias=np.zeros(num_classes),
    )


def init_model(
    model_type: str,
    input_dim: int,
    hidden_dims: Sequence[int],
    num_classes: int,
    readout: str,
    seed: int,
    use_bias: bool = True,
) -> ModelSpec:
    """Fresh model with Glorot-uniform weights and zero biases."""
    rng = np.random.default_rng(seed)
    dims = [input_dim] + list(hidden_dims)
    layers = []
    # every trainable tensor draws uniform [-s, s]; zero biases would leave
    # dead nodes' pre-activations exactly on the ReLU kink
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        if model_type == "gcn":
            layers.append(
                GCNLayer(
                    weight=glorot_uniform(rng, d_in, d_out, (d_in, d_out)),
                    bias=glorot_uniform(rng, d_in, d_out, d_out) if use_bias else None,
                )
            )
        elif model_type == "gin":
            layers.append(
                GINLayer(
                    mlp_w1=glorot_uniform(rng, d_in, d_out, (d_in, d_out)),
                    mlp_b1=glorot_uniform(rng, d_in, d_out, d_out),
                    mlp_w2=glorot_uniform(rng, d_out, d_out, (d_out, d_out)),
                    mlp_b2=glorot_uniform(rng, d_out, d_out, d_out),
                    eps=0.0,
                )
            )
        else:
            raise InputError(f"unknown model_type {model_type!r}")
    classifier_w = glorot_uniform(rng, dims[-1], num_classes, (dims[-1], num_classes))
    return ModelSpec(
        model_type=model_type,
        layers=tuple(layers),
        readout=readout,
        classifier_weight=classifier_w,
        classifier_bias=glorot_uniform(rng, dims[-1], num_classes, num_classes),
    )


def _params_of(model: ModelSpec) -> list:
    """Mutable copies of all trainable arrays, in a fixed order."""
    params = []
    for layer in model.layers:
        if isinstance(layer, GCNLayer):
            p = {"weight": np.array(layer.weight)}
            if layer.bias is not None:
                p["bias"] = np.array(layer.bias)
        else:
            p = {
                "mlp_w1": np.array(layer.mlp_w1),
                "mlp_b1": np.array(layer.mlp_b1),
                "mlp_w2": np.array(layer.mlp_w2),
                "mlp_b2": np.array(layer.mlp_b2),
            }
        params.append(p)
    params.append(
        {"weight": np.array(model.classifier_weight), "bias": np.array(model.classifier_bias)}
    )
    return params


def _model_with_params(model: ModelSpec, params: list) -> ModelSpec:
    layers = []
    for layer, p in zip(model.layers, params[:-1]):
        if isinstance(layer, GCNLayer):
            layers.append(GCNLayer(weight=p["weight"], bias=p.get("bias")))
        else:
            layers.append(
                GINLayer(
                    mlp_w1=p["mlp_w1"], mlp_b1=p["mlp_b1"],
                    mlp_w2=p["mlp_w2"], mlp_b2=p["mlp_b2"],
                    eps=layer.eps,
                )
            )
    return ModelSpec(
        model_type=model.model_type,
        layers=tuple(layers),
        readout=model.readout,
        classifier_weight=params[-1]["weight"],
        classifier_bias=params[-1]["bias"],
    )


@dataclass
class TrainBatch:
    """Preassembled full-batch tensors for one dataset.

    Graph mode: all graphs concatenated along the node axis with a
    block-diagonal propagation operator and per-graph segment offsets.
    Node mode: one entry per distinct structure with its target-node /
    label pairs gathered.
    """

    mode: str  # "graph" | "node"
    props: list  # per entry: (n, n) propagation operator (dense or sparse)
    inputs: list  # per entry: (n, d) input features
    offsets: Optional[np.ndarray]  # graph mode: segment starts, length G+1
    targets: list  # node mode: per entry, array of node indices
    labels: list  # per entry: int array
    num_examples: int


def structure_key(g: Graph):
    return (g.num_nodes, g.edges, g.features.tobytes())


def build_batch(model: ModelSpec, graphs: Sequence[Graph]) -> TrainBatch:
    if not graphs:
        raise InputError("dataset is empty")
    mode = "node" if model.readout == "none" else "graph"
    for g in graphs:
        if g.feature_dim != model.input_dim:
            raise InputError("graph feature dim does not match model input dim")
        if g.label is None:
            raise InputError("training requires a label on every record")
    if mode == "graph":
        blocks = [sp.csr_matrix(propagation_operator(model, g)) for g in graphs]
        prop = sp.block_diag(blocks, format="csr")
        x0 = np.concatenate([g.features for g in graphs], axis=0)
        sizes = np.array([g.num_nodes for g in graphs])
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        labels = np.array([g.label for g in graphs], dtype=np.int64)
        return TrainBatch(
            mode="graph",
            props=[prop],
            inputs=[x0],
            offsets=offsets,
            targets=[],
            labels=[labels],
            num_examples=len(graphs),
        )
    props = []
    inputs = []
    targets = []
    labels = []
    order = {}
    for g in graphs:
        if g.target_node is None:
            raise InputError("node-classification training requires target_node")
        key = structure_key(g)
        if key not in order:
            order[key] = len(props)
            props.append(propagation_operator(model, g, sparse=g.num_nodes >= 128))
            inputs.append(np.array(g.features))
            targets.append([])
            labels.append([])
        idx = order[key]
        targets[idx].append(g.target_node)
        labels[idx].append(g.label)
    return TrainBatch(
        mode="node",
        props=props,
        inputs=inputs,
        offsets=None,
        targets=[np.array(t, dtype=np.int64) for t in targets],
        labels=[np.array(l, dtype=np.int64) for l in labels],
        num_examples=len(graphs),
    )


def _forward_cached(model: ModelSpec, prop, x: np.ndarray):
    """Layer outputs plus the intermediates backprop needs. x is 2-D."""
    cache = []
    for layer in model.layers:
        agg = prop @ x
        if isinstance(layer, GCNLayer):
            z = agg @ layer.weight
            if layer.bias is not None:
                z = z + layer.bias
            out = np.maximum(z, 0.0)
            cache.append({"agg": agg, "z": z})
        else:
            z0 = (1.0 + layer.eps) * x + agg
            h1 = z0 @ layer.mlp_w1 + layer.mlp_b1
            a1 = np.maximum(h1, 0.0)
            h2 = a1 @ layer.mlp_w2 + layer.mlp_b2
            out = np.maximum(h2, 0.0)
            cache.append({"z0": z0, "h1": h1, "a1": a1, "h2": h2})
        x = out
    return x, cache


def _backward_layers(model: ModelSpec, prop, cache: list, dx: np.ndarray, grads: list):
    for i in reversed(range(len(model.layers))):
        layer = model.layers[i]
        c = cache[i]
        if isinstance(layer, GCNLayer):
            dz = dx * (c["z"] > 0)
            grads[i]["weight"] += c["agg"].T @ dz
            if "bias" in grads[i]:
                grads[i]["bias"] += dz.sum(axis=0)
            dagg = dz @ layer.weight.T
            dx = prop @ dagg  # propagation operators are symmetric
        else:
            dh2 = dx * (c["h2"] > 0)
            grads[i]["mlp_w2"] += c["a1"].T @ dh2
            grads[i]["mlp_b2"] += dh2.sum(axis=0)
            da1 = dh2 @ layer.mlp_w2.T
            dh1 = da1 * (c["h1"] > 0)
            grads[i]["mlp_w1"] += c["z0"].T @ dh1
            grads[i]["mlp_b1"] += dh1.sum(axis=0)
            dz0 = dh1 @ layer.mlp_w1.T
            dx = (1.0 + layer.eps) * dz0 + prop @ dz0


def _zero_grads(model: ModelSpec) -> list:
    grads = []
    for layer in model.layers:
        if isinstance(layer, GCNLayer):
            gdict = {"weight": np.zeros_like(layer.weight)}
            if layer.bias is not None:
                gdict["bias"] = np.zeros_like(layer.bias)
        else:
            gdict = {
                "mlp_w1": np.zeros_like(layer.mlp_w1),
                "mlp_b1": np.zeros_like(layer.mlp_b1),
                "mlp_w2": np.zeros_like(layer.mlp_w2),
                "mlp_b2": np.zeros_like(layer.mlp_b2),
            }
        grads.append(gdict)
    grads.append(
        {
            "weight": np.zeros_like(model.classifier_weight),
            "bias": np.zeros_like(model.classifier_bias),
        }
    )
    return grads


def _segment_readout(model: ModelSpec, x: np.ndarray, offsets: np.ndarray):
    starts = offsets[:-1]
    if model.readout == "mean":
        counts = np.diff(offsets).astype(np.float64)
        rep = np.add.reduceat(x, starts, axis=0) / counts[:, None]
        return rep, counts
    rep = np.maximum.reduceat(x, starts, axis=0)
    # argmax rows per segment for the backward routing; ties go to the
    # lowest node index via first-match argmax on each segment
    args = np.empty((len(starts), x.shape[1]), dtype=np.int64)
    for i, (a, b) in enumerate(zip(offsets[:-1], offsets[1:])):
        args[i] = a + np.argmax(x[a:b], axis=0)
    return rep, args


def batch_loss_and_grads(model: ModelSpec, batch: TrainBatch):
    """Mean cross-entropy over the batch and gradients for every parameter."""
    grads = _zero_grads(model)
    total = batch.num_examples
    if batch.mode == "graph":
        prop, x0 = batch.props[0], batch.inputs[0]
        labels = batch.labels[0]
        offsets = batch.offsets
        x, cache = _forward_cached(model, prop, x0)
        rep, aux = _segment_readout(model, x, offsets)
        logits = rep @ model.classifier_weight + model.classifier_bias
        probs = softmax(logits)
        idx = np.arange(total)
        loss = float(-np.mean(np.log(probs[idx, labels])))
        dlogits = probs.copy()
        dlogits[idx, labels] -= 1.0
        dlogits /= total
        grads[-1]["weight"] += rep.T @ dlogits
        grads[-1]["bias"] += dlogits.sum(axis=0)
        drep = dlogits @ model.classifier_weight.T
        dx = np.zeros_like(x)
        if model.readout == "mean":
            counts = aux
            scaled = drep / counts[:, None]
            dx = np.repeat(scaled, np.diff(offsets), axis=0)
        else:
            args = aux
            fi = np.tile(np.arange(x.shape[1]), total)
            np.add.at(dx, (args.ravel(), fi), drep.ravel())
        _backward_layers(model, prop, cache, dx, grads)
        return loss, grads
    loss_sum = 0.0
    for prop, x0, targets, labels in zip(batch.props, batch.inputs, batch.targets, batch.labels):
        x, cache = _forward_cached(model, prop, x0)
        rep = x[targets]
        logits = rep @ model.classifier_weight + model.classifier_bias
        probs = softmax(logits)
        idx = np.arange(len(targets))
        loss_sum += float(-np.sum(np.log(probs[idx, labels])))
        dlogits = probs.copy()
        dlogits[idx, labels] -= 1.0
        dlogits /= total
        grads[-1]["weight"] += rep.T @ dlogits
        grads[-1]["bias"] += dlogits.sum(axis=0)
        drep = dlogits @ model.classifier_weight.T
        dx = np.zeros_like(x)
        np.add.at(dx, targets, drep)
        _backward_layers(model, prop, cache, dx, grads)
    return loss_sum / total, grads


def batch_loss(model: ModelSpec, batch: TrainBatch) -> float:
    return batch_loss_and_grads(model, batch)[0]


def extract_representations(model: ModelSpec, batch: TrainBatch, node_keep=None):
    """Classifier inputs (readout rows or target-node rows) plus labels.

    ``node_keep`` optionally multiplies the input features by a 0/1 vector
    over the batch's concatenated nodes (occlusion augmentation).
    """
    if batch.mode == "graph":
        x0 = batch.inputs[0]
        if node_keep is not None:
            x0 = x0 * node_keep[:, None]
        x, _ = _forward_cached(model, batch.props[0], x0)
        rep, _ = _segment_readout(model, x, batch.offsets)
        return rep, batch.labels[0]
    reps = []
    labels = []
    at = 0
    for prop, x0, targets, lab in zip(batch.props, batch.inputs, batch.targets, batch.labels):
        if node_keep is not None:
            x0 = x0 * node_keep[at : at + x0.shape[0], None]
        at += x0.shape[0]
        x, _ = _forward_cached(model, prop, x0)
        reps.append(x[targets])
        labels.append(lab)
    return np.concatenate(reps, axis=0), np.concatenate(labels)


def _train_head_whitened(
    model: ModelSpec,
    batch: TrainBatch,
    epochs: int,
    learning_rate: float,
    occlusion_variants: int = 0,
    seed: int = 0,
) -> ModelSpec:
    """Full-batch gradient descent on the linear classifier over standardized
    representations; the standardization constants fold back into the
    exported classifier, so the result is a plain linear head.

    ``occlusion_variants`` adds copies of the training set with random node
    subsets zero-padded, which concentrates class evidence on structures that
    survive occlusion (the same perturbation the scoring game applies).
    """
    reps, labels = extract_representations(model, batch)
    if occlusion_variants > 0:
        rng = np.random.default_rng((seed, 0x0CC1))
        total_nodes = sum(x.shape[0] for x in batch.inputs)
        more_reps = [reps]
        more_labels = [labels]
        for _ in range(occlusion_variants):
            keep_p = rng.uniform(0.2, 0.9)
            keep = (rng.random(total_nodes) < keep_p).astype(np.float64)
            r, l = extract_representations(model, batch, node_keep=keep)
            more_reps.append(r)
            more_labels.append(l)
        reps = np.concatenate(more_reps, axis=0)
        labels = np.concatenate(more_labels)
    if epochs < 1 or learning_rate == 0.0:
        return model
    mu = reps.mean(axis=0)
    sd = reps.std(axis=0)
    sd = np.maximum(sd, max(float(sd.max()) * 1e-3, 1e-12))
    z = (reps - mu) / sd
    n, width = z.shape
    classes = model.num_classes
    wh = np.zeros((width, classes))
    bh = np.zeros(classes)
    idx = np.arange(n)
    for _ in range(epochs):
        probs = softmax(z @ wh + bh)
        loss = float(-np.mean(np.log(probs[idx, labels])))
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"loss became {loss}")
        d = probs
        d[idx, labels] -= 1.0
        d /= n
        wh -= learning_rate * (z.T @ d)
        bh -= learning_rate * d.sum(axis=0)
    folded_w = wh / sd[:, None]
    folded_b = bh - (mu / sd) @ wh
    return ModelSpec(
        model_type=model.model_type,
        layers=model.layers,
        readout=model.readout,
        classifier_weight=folded_w,
        classifier_bias=folded_b,
    )


def train(
    model: ModelSpec,
    dataset: Sequence[Graph],
    epochs: int,
    learning_rate: float,
    seed: int,
    scheme: str = "glorot",
    occlusion_variants: int = 0,
) -> ModelSpec:
    """Train with full-batch gradient descent; the incoming model supplies
    the architecture only.

    ``scheme="glorot"``: re-initialize every weight from ``seed`` (uniform
    Glorot) and descend on all parameters.

    ``scheme="degree-basis"``: build the fixed hinge-basis feature layers
    from the training data (GCN only; constant-feature datasets give learned
    layers no usable signal, see degree_basis_model) and descend on the
    classifier over standardized representations, folding the
    standardization into the exported weights.
    """
    if scheme == "degree-basis":
        if model.model_type != "gcn":
            raise InputError("degree-basis initialization applies to GCN models only")
        hidden = [layer.out_dim for layer in model.layers]
        if len(set(hidden)) != 1:
            raise InputError("degree-basis initialization needs equal hidden dims")
        basis = degree_basis_model(
            model.input_dim, hidden[0], len(hidden), model.num_classes,
            model.readout, dataset,
        )
        batch = build_batch(basis, dataset)
        return _train_head_whitened(
            basis, batch, epochs, learning_rate,
            occlusion_variants=occlusion_variants, seed=seed,
        )
    if scheme != "glorot":
        raise InputError(f"unknown init scheme {scheme!r}")
    hidden = [layer.out_dim for layer in model.layers]
    use_bias = True
    if model.model_type == "gcn":
        use_bias = all(layer.bias is not None for layer in model.layers)
    fresh = init_model(
        model.model_type, model.input_dim, hidden, model.num_classes,
        model.readout, seed, use_bias=use_bias,
    )
    batch = build_batch(fresh, dataset)
    params = _params_of(fresh)
    current = fresh
    for _ in range(epochs):
        loss, grads = batch_loss_and_grads(current, batch)
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"loss became {loss}")
        for p, gdict in zip(params, grads):
            for name, grad in gdict.items():
                p[name] -= learning_rate * grad
        current = _model_with_params(fresh, params)
    return current


def predict_batch(model: ModelSpec, graphs: Sequence[Graph]) -> list:
    """Predictions for many records, forwarding each distinct structure once."""
    if model.readout != "none":
        return [forward(model, g) for g in graphs]
    embeddings = {}
    out = []
    for g in graphs:
        key = structure_key(g)
        if key not in embeddings:
            prop = propagation_operator(model, g)
            embeddings[key] = apply_layers(model, prop, np.array(g.features))
        if g.target_node is None:
            raise InputError("node-classification prediction requires target_node")
        h = embeddings[key][g.target_node]
        logits = h @ model.classifier_weight + model.classifier_bias
        probs = softmax(logits)
        out.append(Prediction(logits=logits, probabilities=probs, predicted_class=int(np.argmax(probs))))
    return out


def evaluate_accuracy(model: ModelSpec, graphs: Sequence[Graph]) -> float:
    if not graphs:
        raise InputError("cannot evaluate on an empty set")
    preds = predict_batch(model, graphs)
    correct = sum(1 for g, p in zip(graphs, preds) if g.label == p.predicted_class)
    return correct / len(graphs)
