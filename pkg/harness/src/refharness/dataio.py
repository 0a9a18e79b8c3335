"""Shared dataset format: line-delimited JSON records.

Fields per line: id, num_nodes, edges, features, optional label and
target_node. Unknown fields are rejected, matching the producer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

_FIELDS = {"id", "num_nodes", "edges", "features", "label", "target_node"}


@dataclass
class GraphRecord:
    graph_id: str
    num_nodes: int
    edges: list
    features: np.ndarray
    label: Optional[int] = None
    target_node: Optional[int] = None


def read_dataset(path) -> list:
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            unknown = set(doc) - _FIELDS
            if unknown:
                raise ValueError(f"line {lineno}: unknown fields {sorted(unknown)}")
            feats = np.asarray(doc["features"], dtype=np.float64)
            if feats.shape[0] != doc["num_nodes"]:
                raise ValueError(f"line {lineno}: feature row count mismatch")
            records.append(
                GraphRecord(
                    graph_id=doc["id"],
                    num_nodes=int(doc["num_nodes"]),
                    edges=[(int(u), int(v)) for u, v in doc["edges"]],
                    features=feats,
                    label=doc.get("label"),
                    target_node=doc.get("target_node"),
                )
            )
    return records
