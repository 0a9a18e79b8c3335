"""Shared weight-file format (format_version "1").

Floats are emitted with 17 significant digits so IEEE-754 doubles round-trip
bit exactly between implementations.
"""

from __future__ import annotations

import json
from pathlib import Path


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _emit(obj, out: list) -> None:
    if isinstance(obj, dict):
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append(",")
            out.append(json.dumps(k))
            out.append(":")
            _emit(v, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(",")
            _emit(v, out)
        out.append("]")
    elif isinstance(obj, float):
        out.append(_fmt(obj))
    elif isinstance(obj, (int, str)):
        out.append(json.dumps(obj))
    else:
        raise TypeError(f"cannot serialize {type(obj)}")


def save_document(doc: dict, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    out: list = []
    _emit(doc, out)
    out.append("\n")
    path.write_text("".join(out), encoding="utf-8")


def load_document(path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format_version") != "1":
        raise ValueError(f"unsupported format_version {doc.get('format_version')!r}")
    required = {"model_type", "input_dim", "num_classes", "readout", "layers", "classifier"}
    missing = required - set(doc)
    if missing:
        raise ValueError(f"weight file missing fields {sorted(missing)}")
    if doc["model_type"] not in ("gcn", "gin"):
        raise ValueError(f"unknown model_type {doc['model_type']!r}")
    if doc["readout"] not in ("max", "mean", "none"):
        raise ValueError(f"unknown readout {doc['readout']!r}")
    return doc
