"""HTTP service exposing fit / rank / predict / cross-validate.

Requests carry file *contents* (dataset text, stopword list, serialized
model), so clients never need shared disk with the server. Responses return
the exact artifact bytes the toolkit produces (model files, ranking CSV,
report text) plus a few convenience fields; determinism of those artifacts is
preserved end to end because they travel as opaque strings.

Domain errors map to HTTP 400 with a structured detail carrying the error
kind and the process exit code thin clients should use.
"""

from __future__ import annotations

import time
from typing import Literal, Union

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .classifier import model_from_text, model_to_text
from .data_io import load_any_text, read_stopwords_text, load_corpus_text, load_dense_csv_text, load_sparse_text
from .errors import MemdError
from .harness import (
    ExperimentConfig,
    cross_validate,
    fit_full,
    predict_source,
    rank_full,
    render_report,
)
from .selection import ranking_csv

app = FastAPI(title="memd", version=__version__)


@app.exception_handler(MemdError)
async def memd_error_handler(request: Request, exc: MemdError):
    return JSONResponse(
        status_code=400,
        content={
            "detail": {
                "kind": type(exc).__name__,
                "message": str(exc),
                "exit_code": exc.exit_code,
            }
        },
    )


class ExperimentOptions(BaseModel):
    method: Literal["j", "js"] = "j"
    orders: Literal[1, 2] = 1
    support: Literal["halfline", "real", "unit"] = "halfline"
    k: Union[int, Literal["auto"]] = "auto"
    smoothing: float = 1e-6
    variance_floor: float = 1e-4
    gamma: int = Field(default=2, ge=1)
    stopwords: str = ""  # stopword file content, one word per line
    seed: int = 0
    stratified: bool = False
    folds: int = Field(default=10, ge=2)

    def to_config(self) -> ExperimentConfig:
        return ExperimentConfig(
            method=self.method,
            orders=(1,) if self.orders == 1 else (1, 2),
            support=self.support,
            k=None if self.k == "auto" else int(self.k),
            smoothing=self.smoothing,
            variance_floor=self.variance_floor,
            gamma=self.gamma,
            stopwords=read_stopwords_text(self.stopwords),
            folds=self.folds,
            seed=self.seed,
            stratified=self.stratified,
        )


class FitRequest(ExperimentOptions):
    data: str
    format: Literal["csv", "sparse", "corpus"]


class FitResponse(BaseModel):
    model: str  # serialized model file content
    chosen_k: int
    selected: list[int]
    n_classes: int
    n_features: int


class RankResponse(BaseModel):
    csv: str


class PredictRequest(BaseModel):
    model: str  # serialized model file content
    data: str
    format: Literal["csv", "sparse", "corpus"]


class PredictResponse(BaseModel):
    csv: str


class CvResponse(BaseModel):
    report: str
    mean_accuracy: float
    fold_accuracies: list[float]
    chosen_ks: list[int]
    total_seconds: float


class HealthResponse(BaseModel):
    status: str
    version: str


@app.get("/v1/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/v1/fit", response_model=FitResponse)
def fit_endpoint(request: FitRequest) -> FitResponse:
    source = load_any_text(request.data, request.format)
    model = fit_full(source, request.to_config())
    return FitResponse(
        model=model_to_text(model),
        chosen_k=len(model.selected),
        selected=list(model.selected),
        n_classes=model.n_classes,
        n_features=model.d,
    )


@app.post("/v1/rank", response_model=RankResponse)
def rank_endpoint(request: FitRequest) -> RankResponse:
    source = load_any_text(request.data, request.format)
    ranking = rank_full(source, request.to_config())
    return RankResponse(csv=ranking_csv(ranking))


@app.post("/v1/predict", response_model=PredictResponse)
def predict_endpoint(request: PredictRequest) -> PredictResponse:
    model = model_from_text(request.model)
    if request.format == "sparse":
        source = load_sparse_text(request.data, n_features=model.d)
    elif request.format == "csv":
        source = load_dense_csv_text(request.data)
    else:
        source = load_corpus_text(request.data)
    predicted, posteriors = predict_source(model, source)
    names = model.label_map.names
    header = "instance_id,predicted_label," + ",".join(
        f"log_posterior_{name}" for name in names
    )
    lines = [header]
    for i, (label, row) in enumerate(zip(predicted, posteriors)):
        cells = ",".join(repr(float(v)) for v in row)
        lines.append(f"{i},{names[label]},{cells}")
    return PredictResponse(csv="\n".join(lines) + "\n")


@app.post("/v1/cv", response_model=CvResponse)
def cv_endpoint(request: FitRequest) -> CvResponse:
    source = load_any_text(request.data, request.format)
    started = time.perf_counter()
    report = cross_validate(source, request.to_config())
    return CvResponse(
        report=render_report(report),
        mean_accuracy=report.mean_accuracy,
        fold_accuracies=report.fold_accuracies,
        chosen_ks=report.chosen_ks,
        total_seconds=time.perf_counter() - started,
    )
