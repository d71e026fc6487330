"""Naive-Bayes decision layer over selected maximum-entropy marginals.

Training fits one marginal per (feature, class) cell from per-class moment
vectors, ranks features by the configured divergence criterion, and keeps the
top K. Prediction scores a point by

    ln P(c_j) + sum_{i in selected} ln p_ij(x_i)

and takes the argmax, ties to the lowest class index. For two classes the
same rule can be evaluated directly from multiplier differences; both
formulations are algebraic rearrangements of each other and must agree on
every input.

Raw moments pool linearly, so the one-vs-all complement marginals are fitted
from count-weighted averages of the per-class moments, which is exactly a
refit on the pooled complement samples.

Models are immutable after fit; prediction is pure and parallel over
instances.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import maxent
from .data_io import Dataset, LabelMap, Vocabulary
from .errors import ConfigError, EmptyClass, InvalidK, WrongArity
from .maxent import FeatureFunctionSpec, MaxEntDensity, MomentVector, SupportSpec, log_density
from .selection import (
    MarginalGrid,
    RankedFeatures,
    score_binary_j,
    score_js_gm,
    score_one_vs_all_j,
)

MODEL_FORMAT = "memd-model"
MODEL_VERSION = 1

METHOD_J = "j"
METHOD_JS = "js"


@dataclass(frozen=True)
class ModelConfig:
    """Everything `fit` needs besides the data."""

    orders: tuple[int, ...] = (1,)
    support: SupportSpec = SupportSpec.halfline()
    method: str = METHOD_J
    k: int | None = None  # None: keep all features
    smoothing: float = maxent.DEFAULT_SMOOTHING
    variance_floor: float = maxent.DEFAULT_VARIANCE_FLOOR

    def __post_init__(self):
        if self.method not in (METHOD_J, METHOD_JS):
            raise ConfigError(f"unknown method {self.method!r}")

    @property
    def spec(self) -> FeatureFunctionSpec:
        return FeatureFunctionSpec(self.orders)


@dataclass(frozen=True, eq=False)
class NaiveBayesModel:
    grid: MarginalGrid
    selected: tuple[int, ...]
    priors: np.ndarray
    label_map: LabelMap
    method: str
    ranking: RankedFeatures | None = None  # None on deserialized models
    vocabulary: Vocabulary | None = None

    @property
    def d(self) -> int:
        return self.grid.n_features

    @property
    def n_classes(self) -> int:
        return self.grid.n_classes


def _class_moment_table(dataset: Dataset, orders) -> tuple[np.ndarray, np.ndarray]:
    """Raw per-class moment sums: table[c, k, i] = sum over class-c rows of x_i^k."""
    m = dataset.n_classes
    counts = np.bincount(dataset.labels, minlength=m)
    table = np.zeros((m, len(orders), dataset.d))
    for c in range(m):
        rows = dataset.X[dataset.labels == c]
        for ki, k in enumerate(orders):
            if sp.issparse(rows):
                powered = rows.power(k) if k != 1 else rows
                table[c, ki] = np.asarray(powered.sum(axis=0)).ravel()
            else:
                table[c, ki] = np.sum(rows**k, axis=0)
    return table, counts


def build_grid(dataset: Dataset, config: ModelConfig, with_complements: bool) -> MarginalGrid:
    """Fit the (feature, class) marginal grid, optionally with complements."""
    m = dataset.n_classes
    counts = np.bincount(dataset.labels, minlength=m)
    for c, count in enumerate(counts):
        if count == 0:
            raise EmptyClass(f"class {dataset.label_map.names[c]!r} has no instances")
    sums, counts = _class_moment_table(dataset, config.orders)
    total = counts.sum()

    def fit_cell(raw_values, n):
        moments = MomentVector(tuple(raw_values), int(n))
        return maxent.fit_marginal(
            moments,
            config.spec,
            config.support,
            smoothing=config.smoothing,
            variance_floor=config.variance_floor,
        )

    marginals = [
        [fit_cell(sums[c, :, i] / counts[c], counts[c]) for c in range(m)]
        for i in range(dataset.d)
    ]
    rest = None
    if with_complements:
        rest_sums = sums.sum(axis=0, keepdims=True) - sums  # pooled complements
        rest_counts = total - counts
        rest = [
            [fit_cell(rest_sums[c, :, i] / rest_counts[c], rest_counts[c]) for c in range(m)]
            for i in range(dataset.d)
        ]
    return MarginalGrid(marginals, counts / total, rest_marginals=rest)


def rank_features(dataset: Dataset, config: ModelConfig) -> tuple[MarginalGrid, RankedFeatures]:
    """Build the grid demanded by the ranking method and score it."""
    m = dataset.n_classes
    needs_complements = config.method == METHOD_J and m > 2
    grid = build_grid(dataset, config, with_complements=needs_complements)
    if config.method == METHOD_J:
        ranking = score_binary_j(grid) if m == 2 else score_one_vs_all_j(grid)
    else:
        ranking = score_js_gm(grid)
    return grid, ranking


def fit(train: Dataset, config: ModelConfig, vocabulary: Vocabulary | None = None) -> NaiveBayesModel:
    """Estimate priors and marginals, rank features, keep the top K."""
    if train.n == 0:
        raise EmptyClass("training set is empty")
    k = config.k if config.k is not None else train.d
    if not 1 <= k <= train.d:
        raise InvalidK(f"k={k} outside 1..{train.d}")
    grid, ranking = rank_features(train, config)
    return NaiveBayesModel(
        grid=grid,
        selected=ranking.top(k),
        priors=grid.priors,
        label_map=train.label_map,
        method=config.method,
        ranking=ranking,
        vocabulary=vocabulary,
    )


def log_posterior_matrix(model: NaiveBayesModel, X) -> np.ndarray:
    """Unnormalized log posteriors, shape (n, M)."""
    n = X.shape[0]
    scores = np.tile(np.log(model.priors), (n, 1))
    sparse = sp.issparse(X)
    for i in model.selected:
        col = X[:, i]
        col = np.asarray(col.todense()).ravel() if sparse else np.asarray(col).ravel()
        for j in range(model.n_classes):
            scores[:, j] += log_density(model.grid.marginals[i][j], col)
    return scores


def log_posterior(model: NaiveBayesModel, x) -> np.ndarray:
    """Unnormalized log posterior of a single instance."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.d,):
        raise ValueError(f"instance must have {model.d} features")
    return log_posterior_matrix(model, x[None, :])[0]


def predict_matrix(model: NaiveBayesModel, X) -> np.ndarray:
    """Class ids for every row; argmax ties go to the lowest class index."""
    return np.argmax(log_posterior_matrix(model, X), axis=1)


def predict(model: NaiveBayesModel, x) -> int:
    return int(np.argmax(log_posterior(model, x)))


def binary_decision_lambda_form(model: NaiveBayesModel, x) -> int:
    """Two-class decision evaluated directly on multiplier differences.

    Assigns the first class when

        sum_{i in S} (lam0_i2 - lam0_i1 + sum_k (lam_k_i2 - lam_k_i1) x_i^k)
            >= ln P(c_2) - ln P(c_1),

    with equality going to the first class, matching `predict`'s tie rule.
    A selected value outside the shared support sends both class posteriors
    to -inf, which is also a tie.
    """
    if model.n_classes != 2:
        raise WrongArity(f"lambda-form decision needs 2 classes, got {model.n_classes}")
    x = np.asarray(x, dtype=float)
    lhs = 0.0
    for i in model.selected:
        first, second = model.grid.marginals[i]
        if not first.support.contains(x[i]):
            return 0
        lhs += second.log_normalizer - first.log_normalizer
        for lam2, lam1, k in zip(second.lambdas, first.lambdas, first.spec.orders):
            lhs += (lam2 - lam1) * x[i] ** k
    rhs = float(np.log(model.priors[1]) - np.log(model.priors[0]))
    return 0 if lhs >= rhs else 1


def accuracy(model: NaiveBayesModel, dataset: Dataset) -> float:
    return float(np.mean(predict_matrix(model, dataset.X) == dataset.labels))


# -- serialization ------------------------------------------------------------
#
# A versioned JSON document. All reals pass through repr-exact float encoding,
# so load(save(model)) reproduces every stored value bit for bit.


def _density_payload(density: MaxEntDensity) -> dict:
    return {
        "support": {
            "kind": density.support.kind,
            "lower": density.support.lower,
            "upper": density.support.upper,
        },
        "orders": list(density.spec.orders),
        "log_normalizer": density.log_normalizer,
        "lambdas": list(density.lambdas),
        "moments": list(density.moments.values),
        "sample_count": density.moments.sample_count,
        "fit_tol": density.fit_tol,
    }


def _density_from_payload(payload: dict) -> MaxEntDensity:
    support = payload["support"]
    return MaxEntDensity(
        support=SupportSpec(support["kind"], support["lower"], support["upper"]),
        spec=FeatureFunctionSpec(tuple(payload["orders"])),
        lambdas=tuple(payload["lambdas"]),
        log_normalizer=payload["log_normalizer"],
        moments=MomentVector(tuple(payload["moments"]), payload["sample_count"]),
        fit_tol=payload["fit_tol"],
    )


def model_to_text(model: NaiveBayesModel) -> str:
    document = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "method": model.method,
        "priors": [float(p) for p in model.priors],
        "labels": list(model.label_map.names),
        "selected": [int(i) for i in model.selected],
        "d": model.d,
        "marginals": [
            [_density_payload(density) for density in row]
            for row in model.grid.marginals
        ],
    }
    if model.vocabulary is not None:
        document["vocabulary"] = list(model.vocabulary.words)
    return json.dumps(document, indent=1) + "\n"


def model_from_text(text: str) -> NaiveBayesModel:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"not a model file: {err}") from None
    if document.get("format") != MODEL_FORMAT:
        raise ConfigError("not a memd model file")
    if document.get("version") != MODEL_VERSION:
        raise ConfigError(f"unsupported model version {document.get('version')}")
    marginals = [
        [_density_from_payload(p) for p in row] for row in document["marginals"]
    ]
    priors = np.array(document["priors"], dtype=float)
    grid = MarginalGrid(marginals, priors)
    selected = tuple(document["selected"])
    vocabulary = None
    if "vocabulary" in document:
        vocabulary = Vocabulary.from_words(document["vocabulary"])
    return NaiveBayesModel(
        grid=grid,
        selected=selected,
        priors=priors,
        label_map=LabelMap(tuple(document["labels"])),
        method=document["method"],
        vocabulary=vocabulary,
    )


def save_model(model: NaiveBayesModel, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_text(model))


def load_model(path) -> NaiveBayesModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_text(fh.read())
