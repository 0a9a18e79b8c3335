"""HTTP service exposing the pipeline: generate, train, explain, evaluate,
predict. The CLI is a thin client of these endpoints."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from . import __version__, pipeline
from .errors import SubgraphXError
from .schemas import (
    EvalRequest,
    EvalResponse,
    ExplainRequest,
    ExplainResponse,
    GenRequest,
    GenResponse,
    PredictRequest,
    PredictResponse,
    TrainRequest,
    TrainResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(title="subgraphx", version=__version__)

    def guarded(fn, req):
        try:
            return fn(req)
        except SubgraphXError as e:
            raise HTTPException(status_code=400, detail=str(e)) from e
        except FileNotFoundError as e:
            raise HTTPException(status_code=400, detail=str(e)) from e

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/gen", response_model=GenResponse)
    def gen(req: GenRequest) -> GenResponse:
        return guarded(pipeline.run_gen, req)

    @app.post("/train", response_model=TrainResponse)
    def train(req: TrainRequest) -> TrainResponse:
        return guarded(pipeline.run_train, req)

    @app.post("/explain", response_model=ExplainResponse)
    def explain(req: ExplainRequest) -> ExplainResponse:
        return guarded(pipeline.run_explain, req)

    @app.post("/eval", response_model=EvalResponse)
    def evaluate(req: EvalRequest) -> EvalResponse:
        return guarded(pipeline.run_eval, req)

    @app.post("/predict", response_model=PredictResponse)
    def predict(req: PredictRequest) -> PredictResponse:
        return guarded(pipeline.run_predict, req)

    return app
