"""Request / response models for the service endpoints.

The CLI builds these from flags and posts them; the service validates and
hands them to the pipeline functions.
"""

from __future__ import annotations

from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

Hops = Union[int, Literal["inf"]]


class GenRequest(BaseModel):
    dataset: Literal["ba2motifs", "bashape"]
    out_dir: str
    num_graphs: int = 1000
    seed: int = 0


class GenResponse(BaseModel):
    dataset_path: str
    ground_truth_path: str
    num_records: int
    label_counts: dict[int, int]
    warnings: list[str] = []


class TrainRequest(BaseModel):
    dataset: str
    out: str
    model_type: Literal["gcn", "gin"] = "gcn"
    task: Literal["graph", "node"] = "graph"
    readout: Literal["max", "mean"] = "mean"
    hidden_dims: list[int] = [20, 20, 20]
    epochs: int = 800
    learning_rate: float = 0.5
    seed: int = 0
    init: Literal["auto", "glorot", "degree-basis"] = "auto"
    occlusion_variants: int = 0


class TrainResponse(BaseModel):
    weights_path: str
    train_accuracy: float
    val_accuracy: Optional[float] = None
    test_accuracy: Optional[float] = None
    num_train: int
    num_val: int
    num_test: int
    final_epoch_loss: float


class ExplainRequest(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    model: str
    dataset: str
    out_dir: str
    graphs: str = "all"  # "all" or comma-separated record ids
    task: Literal["graph", "node"] = "graph"
    target_node: Optional[int] = None
    scorer: Literal["shapley-mc", "shapley-exact", "direct"] = "shapley-mc"
    samples: int = 100
    hops: Hops = 3
    nmin: int = 5
    iterations: int = 20
    exploration: float = Field(10.0, alias="lambda")
    prune: Literal["low2high", "high2low"] = "low2high"
    prune_k: Optional[int] = 12
    seed: int = 0
    workers: int = 1


class ExplainResponse(BaseModel):
    documents: list[str]
    explained: list[str]
    failures: list[dict]


class EvalRequest(BaseModel):
    model: str
    dataset: str
    explanations: str  # directory of explanation documents
    out_dir: Optional[str] = None
    sizes: list[int] = []
    ground_truth: Optional[str] = None


class CurveRow(BaseModel):
    size: int
    sparsity: float
    fidelity: float
    n_graphs: int
    fallbacks: list[tuple[str, int]] = []


class EvalResponse(BaseModel):
    fidelity: float
    sparsity: float
    n_graphs: int
    curve: list[CurveRow]
    motif_recall: Optional[float] = None
    metrics_path: Optional[str] = None
    curve_csv_path: Optional[str] = None
    curve_json_path: Optional[str] = None


class PredictRequest(BaseModel):
    model: str
    dataset: str
    graphs: str = "all"
    out: Optional[str] = None


class PredictRecord(BaseModel):
    graph_id: str
    logits: list[float]
    probabilities: list[float]
    predicted_class: int
    label: Optional[int] = None


class PredictResponse(BaseModel):
    records: list[PredictRecord]
    out_path: Optional[str] = None
