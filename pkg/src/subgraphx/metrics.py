"""Quantitative evaluation: Fidelity, Sparsity, curves, motif recall.

Fidelity is the mean drop in predicted-class probability when the selected
(important) nodes are occluded with zero features; Sparsity is the mean
fraction of nodes not selected. Occlusion uses the same zero-padding
primitive as the scoring game, and never occludes a node-task target.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import InputError
from .graph import Graph, nodeset
from .model import ModelSpec, forward


@dataclass(frozen=True)
class EvalRecord:
    graph_id: str
    mask: tuple
    original_prob: float
    occluded_prob: float
    sparsity: float


def occlusion_records(
    model: ModelSpec,
    graphs: Sequence[Graph],
    masks: Sequence,
    ids: Optional[Sequence[str]] = None,
) -> list:
    if not graphs:
        raise InputError("empty evaluation batch")
    if len(graphs) != len(masks):
        raise InputError("need exactly one mask per graph")
    if ids is None:
        ids = [str(i) for i in range(len(graphs))]
    records = []
    for gid, g, mask in zip(ids, graphs, masks):
        mask = nodeset(mask)
        for n in mask:
            if not (0 <= n < g.num_nodes):
                raise InputError(f"mask node {n} out of range for graph {gid}")
        base = forward(model, g)
        y = base.predicted_class
        keep = set(g.all_nodes()) - set(mask)
        if model.readout == "none" and g.target_node is not None:
            keep.add(g.target_node)
        occluded = forward(model, g, feature_mask=nodeset(keep))
        records.append(
            EvalRecord(
                graph_id=gid,
                mask=mask,
                original_prob=float(base.probabilities[y]),
                occluded_prob=float(occluded.probabilities[y]),
                sparsity=1.0 - len(mask) / g.num_nodes,
            )
        )
    return records


def fidelity(model: ModelSpec, graphs: Sequence[Graph], masks: Sequence) -> float:
    """Mean probability drop for the predicted class after occluding masks."""
    records = occlusion_records(model, graphs, masks)
    return sum(r.original_prob - r.occluded_prob for r in records) / len(records)


def sparsity(masks: Sequence, graphs: Sequence[Graph]) -> float:
    """Mean fraction of nodes left out of the masks."""
    if not graphs:
        raise InputError("empty evaluation batch")
    if len(graphs) != len(masks):
        raise InputError("need exactly one mask per graph")
    return sum(1.0 - len(set(m)) / g.num_nodes for m, g in zip(masks, graphs)) / len(graphs)


@dataclass(frozen=True)
class CurvePoint:
    size: int
    sparsity: float
    fidelity: float
    n_graphs: int
    fallbacks: tuple  # (graph_id, used_size) pairs where the exact size was absent


def _pick_size(per_size: dict, want: int):
    """Best nodes at the requested size, else the nearest smaller available
    size, else the nearest larger one."""
    if want in per_size:
        return want, per_size[want]
    smaller = [s for s in per_size if s < want]
    if smaller:
        s = max(smaller)
        return s, per_size[s]
    s = min(per_size)
    return s, per_size[s]


def sparsity_fidelity_curve(
    model: ModelSpec,
    graphs: Sequence[Graph],
    explanations: Sequence[dict],
    size_grid: Sequence[int],
    ids: Optional[Sequence[str]] = None,
) -> list:
    """One (sparsity, fidelity) point per target explanation size.

    ``explanations`` holds one size -> nodes mapping per graph (the per-size
    bests harvested from a search run). Points come back sorted by sparsity
    ascending.
    """
    if not graphs:
        raise InputError("empty evaluation batch")
    if len(graphs) != len(explanations):
        raise InputError("need exactly one explanation per graph")
    if ids is None:
        ids = [str(i) for i in range(len(graphs))]
    points = []
    for want in sorted(set(int(s) for s in size_grid)):
        masks = []
        fallbacks = []
        for gid, per_size in zip(ids, explanations):
            if not per_size:
                raise InputError(f"explanation for graph {gid} has no per-size data")
            used, nodes = _pick_size(per_size, want)
            if used != want:
                fallbacks.append((gid, used))
            masks.append(nodeset(nodes))
        points.append(
            CurvePoint(
                size=want,
                sparsity=sparsity(masks, graphs),
                fidelity=fidelity(model, graphs, masks),
                n_graphs=len(graphs),
                fallbacks=tuple(fallbacks),
            )
        )
    points.sort(key=lambda p: (p.sparsity, p.size))
    return points


def curve_to_csv(points: Sequence[CurvePoint]) -> str:
    lines = ["size,sparsity,fidelity,n_graphs"]
    for p in points:
        lines.append(f"{p.size},{p.sparsity!r},{p.fidelity!r},{p.n_graphs}")
    return "\n".join(lines) + "\n"


def motif_recall(explanation_nodes: Sequence[int], ground_truth_nodes: Sequence[int]) -> float:
    """Fraction of ground-truth motif nodes recovered by the explanation."""
    truth = set(ground_truth_nodes)
    if not truth:
        raise InputError("ground truth must be nonempty")
    return len(set(explanation_nodes) & truth) / len(truth)
