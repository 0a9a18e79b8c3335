"""Canonical weight-file serialization.

A weight file is a single JSON document with ``format_version`` "1". Floats
are written as decimal text with 17 significant digits so that every IEEE-754
double round-trips exactly; this file is the bit-exact interchange contract
with external training harnesses.

Schema:
    {
      "format_version": "1",
      "model_type": "gcn" | "gin",
      "input_dim": int,
      "num_classes": int,
      "readout": "max" | "mean" | "none",
      "layers": [
        {"weight": [[...]], "bias": [...]}                      # gcn; bias optional
        {"mlp_w1": [[...]], "mlp_b1": [...],
         "mlp_w2": [[...]], "mlp_b2": [...], "eps": float}      # gin
      ],
      "classifier": {"weight": [[...]], "bias": [...]}
    }
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import InputError, WeightFormatError
from .model import GCNLayer, GINLayer, ModelSpec

FORMAT_VERSION = "1"


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
    elif obj is None:
        out.append("null")
    else:
        raise TypeError(f"cannot serialize {type(obj)}")


def _rows(m: np.ndarray) -> list:
    return [[float(x) for x in row] for row in m]


def _vec(v: np.ndarray) -> list:
    return [float(x) for x in v]


def model_to_document(model: ModelSpec) -> dict:
    layers = []
    for layer in model.layers:
        if isinstance(layer, GCNLayer):
            doc = {"weight": _rows(layer.weight)}
            if layer.bias is not None:
                doc["bias"] = _vec(layer.bias)
        else:
            doc = {
                "mlp_w1": _rows(layer.mlp_w1),
                "mlp_b1": _vec(layer.mlp_b1),
                "mlp_w2": _rows(layer.mlp_w2),
                "mlp_b2": _vec(layer.mlp_b2),
                "eps": float(layer.eps),
            }
        layers.append(doc)
    return {
        "format_version": FORMAT_VERSION,
        "model_type": model.model_type,
        "input_dim": model.input_dim,
        "num_classes": model.num_classes,
        "readout": model.readout,
        "layers": layers,
        "classifier": {
            "weight": _rows(model.classifier_weight),
            "bias": _vec(model.classifier_bias),
        },
    }


def save_weights(model: ModelSpec, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    out: list = []
    _emit(model_to_document(model), out)
    out.append("\n")
    path.write_text("".join(out), encoding="utf-8")


def _expect(doc: dict, key: str, where: str):
    if key not in doc:
        raise WeightFormatError(f"{where}: missing field {key!r}")
    return doc[key]


def model_from_document(doc) -> ModelSpec:
    if not isinstance(doc, dict):
        raise WeightFormatError("weight document must be an object")
    version = _expect(doc, "format_version", "weight file")
    if version != FORMAT_VERSION:
        raise WeightFormatError(f"unsupported format_version {version!r}")
    known = {
        "format_version", "model_type", "input_dim", "num_classes",
        "readout", "layers", "classifier",
    }
    unknown = set(doc) - known
    if unknown:
        raise WeightFormatError(f"unknown fields {sorted(unknown)}")
    model_type = _expect(doc, "model_type", "weight file")
    layers_doc = _expect(doc, "layers", "weight file")
    if not isinstance(layers_doc, list) or not layers_doc:
        raise WeightFormatError("layers must be a nonempty list")
    layers = []
    for i, ld in enumerate(layers_doc):
        where = f"layer {i}"
        if not isinstance(ld, dict):
            raise WeightFormatError(f"{where}: expected an object")
        try:
            if model_type == "gcn":
                unknown = set(ld) - {"weight", "bias"}
                if unknown:
                    raise WeightFormatError(f"{where}: unknown fields {sorted(unknown)}")
                layers.append(GCNLayer(weight=_expect(ld, "weight", where), bias=ld.get("bias")))
            elif model_type == "gin":
                unknown = set(ld) - {"mlp_w1", "mlp_b1", "mlp_w2", "mlp_b2", "eps"}
                if unknown:
                    raise WeightFormatError(f"{where}: unknown fields {sorted(unknown)}")
                layers.append(
                    GINLayer(
                        mlp_w1=_expect(ld, "mlp_w1", where),
                        mlp_b1=_expect(ld, "mlp_b1", where),
                        mlp_w2=_expect(ld, "mlp_w2", where),
                        mlp_b2=_expect(ld, "mlp_b2", where),
                        eps=float(ld.get("eps", 0.0)),
                    )
                )
            else:
                raise WeightFormatError(f"unknown model_type {model_type!r}")
        except InputError as e:
            raise WeightFormatError(f"{where}: {e}") from e
    cls = _expect(doc, "classifier", "weight file")
    if not isinstance(cls, dict):
        raise WeightFormatError("classifier must be an object")
    try:
        model = ModelSpec(
            model_type=model_type,
            layers=tuple(layers),
            readout=_expect(doc, "readout", "weight file"),
            classifier_weight=_expect(cls, "weight", "classifier"),
            classifier_bias=_expect(cls, "bias", "classifier"),
        )
    except InputError as e:
        raise WeightFormatError(str(e)) from e
    if model.input_dim != _expect(doc, "input_dim", "weight file"):
        raise WeightFormatError(
            f"declared input_dim {doc['input_dim']} does not match layer 0 "
            f"input dim {model.input_dim}"
        )
    if model.num_classes != _expect(doc, "num_classes", "weight file"):
        raise WeightFormatError(
            f"declared num_classes {doc['num_classes']} does not match "
            f"classifier columns {model.num_classes}"
        )
    return model


def load_weights(path) -> ModelSpec:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise WeightFormatError(f"{path}: invalid JSON: {e}") from e
    return model_from_document(doc)
