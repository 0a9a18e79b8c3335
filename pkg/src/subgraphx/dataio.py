"""Dataset and ground-truth file formats.

Dataset files are line-delimited JSON, one graph per line, with exactly the
fields ``id``, ``num_nodes``, ``edges``, ``features`` and the optional
``label`` and ``target_node``. Unknown fields are rejected so that producers
and consumers cannot drift apart silently.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

from .errors import DatasetFormatError
from .graph import Graph

_REQUIRED_FIELDS = ("id", "num_nodes", "edges", "features")
_OPTIONAL_FIELDS = ("label", "target_node")


class DatasetRecord(NamedTuple):
    graph_id: str
    graph: Graph


def record_to_json(rec: DatasetRecord, _fragment_cache: Optional[dict] = None) -> str:
    g = rec.graph
    parts = [f'{{"id":{json.dumps(rec.graph_id)},"num_nodes":{g.num_nodes}']
    cache = _fragment_cache if _fragment_cache is not None else {}
    key = (id(g.edges), id(g.features))
    if key not in cache:
        edges = json.dumps([[u, v] for u, v in g.edges], separators=(",", ":"))
        feats = json.dumps(
            [[float(x) for x in row] for row in g.features], separators=(",", ":")
        )
        cache[key] = f',"edges":{edges},"features":{feats}'
    parts.append(cache[key])
    if g.label is not None:
        parts.append(f',"label":{int(g.label)}')
    if g.target_node is not None:
        parts.append(f',"target_node":{int(g.target_node)}')
    parts.append("}")
    return "".join(parts)


def record_from_json(line: str, lineno: int = 0) -> DatasetRecord:
    where = f"line {lineno}" if lineno else "record"
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as e:
        raise DatasetFormatError(f"{where}: invalid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise DatasetFormatError(f"{where}: expected an object")
    unknown = set(doc) - set(_REQUIRED_FIELDS) - set(_OPTIONAL_FIELDS)
    if unknown:
        raise DatasetFormatError(f"{where}: unknown fields {sorted(unknown)}")
    missing = [f for f in _REQUIRED_FIELDS if f not in doc]
    if missing:
        raise DatasetFormatError(f"{where}: missing fields {missing}")
    if not isinstance(doc["id"], str):
        raise DatasetFormatError(f"{where}: id must be a string")
    feats = doc["features"]
    if not isinstance(feats, list) or any(not isinstance(r, list) for r in feats):
        raise DatasetFormatError(f"{where}: features must be a list of float lists")
    if len({len(r) for r in feats}) > 1:
        raise DatasetFormatError(f"{where}: feature rows have unequal lengths")
    try:
        graph = Graph(
            num_nodes=int(doc["num_nodes"]),
            edges=tuple((int(u), int(v)) for u, v in doc["edges"]),
            features=feats,
            label=None if doc.get("label") is None else int(doc["label"]),
            target_node=None if doc.get("target_node") is None else int(doc["target_node"]),
        )
    except (ValueError, TypeError) as e:
        raise DatasetFormatError(f"{where}: {e}") from e
    return DatasetRecord(doc["id"], graph)


def write_dataset(path, records: Sequence[DatasetRecord]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fragments: dict = {}  # records often share one structure; serialize it once
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(record_to_json(rec, fragments))
            f.write("\n")


def read_dataset(path) -> list[DatasetRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for i, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            records.append(record_from_json(line, lineno=i))
    ids = [r.graph_id for r in records]
    if len(set(ids)) != len(ids):
        raise DatasetFormatError(f"{path}: duplicate record ids")
    return records


def write_ground_truth(path, entries: dict) -> None:
    """Sidecar of motif annotations: record id -> {"motif": kind, "nodes": [...]}."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        rid: {"motif": e["motif"], "nodes": [int(n) for n in e["nodes"]]}
        for rid, e in sorted(entries.items())
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, separators=(",", ":"), sort_keys=True)
        f.write("\n")


def read_ground_truth(path) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)
