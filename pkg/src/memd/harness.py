"""Experiment harness: fold plans, automatic K selection, cross-validation.

K is chosen per training set by an internal 80/20 split: features are ranked
on the 80% slice, the held-out 20% is scored with growing prefixes of the
ranking, and the smallest K attaining the maximum validation accuracy wins.
The candidate grid is every K up to 200 and then geometric steps of x1.5 up
to the dimensionality, which bounds the sweep on high-dimensional text.

Everything is seeded and deterministic: the same data, configuration and seed
produce a bit-identical report. For text sources the vocabulary is rebuilt
from the training fold only, so no statistic of a test fold ever reaches the
model. Folds are independent and could run concurrently; results are reduced
in fold order.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import classifier
from .classifier import ModelConfig, NaiveBayesModel, accuracy, log_posterior_matrix
from .data_io import Corpus, Dataset, build_vocabulary, featurize_corpus
from .errors import ConfigError, InvalidFolds, StratificationError
from .maxent import SupportSpec, log_density
from .selection import RankedFeatures

SUPPORT_CHOICES = ("halfline", "real", "unit")

AUTO = None  # sentinel meaning "choose K by internal validation"


@dataclass(frozen=True)
class ExperimentConfig:
    """CLI-facing experiment settings; `support` is one of halfline/real/unit."""

    method: str = "j"
    orders: tuple[int, ...] = (1,)
    support: str = "halfline"
    k: int | None = AUTO
    smoothing: float = 1e-6
    variance_floor: float = 1e-4
    gamma: int = 2
    stopwords: frozenset = frozenset()
    folds: int = 10
    seed: int = 0
    stratified: bool = False

    def __post_init__(self):
        if self.support not in SUPPORT_CHOICES:
            raise ConfigError(f"support must be one of {SUPPORT_CHOICES}")
        if self.k is not None and self.k < 1:
            raise ConfigError("k must be >= 1 or auto")

    def support_spec(self) -> SupportSpec:
        if self.support == "halfline":
            return SupportSpec.halfline()
        if self.support == "real":
            return SupportSpec.real()
        return SupportSpec.interval(0.0, 1.0)

    def model_config(self, k: int | None) -> ModelConfig:
        return ModelConfig(
            orders=self.orders,
            support=self.support_spec(),
            method=self.method,
            k=k,
            smoothing=self.smoothing,
            variance_floor=self.variance_floor,
        )


@dataclass(frozen=True)
class FoldPlan:
    n: int
    k: int
    assignments: np.ndarray = field(repr=False)
    seed: int

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)


def kfold_split(n: int, k: int, seed: int) -> FoldPlan:
    """Seeded uniform permutation chunked into k near-equal folds."""
    if k < 2:
        raise InvalidFolds(f"need at least 2 folds, got {k}")
    if k > n:
        raise InvalidFolds(f"{k} folds cannot cover {n} instances")
    permutation = np.random.default_rng(seed).permutation(n)
    assignments = np.empty(n, dtype=int)
    for fold, chunk in enumerate(np.array_split(permutation, k)):
        assignments[chunk] = fold
    return FoldPlan(n, k, assignments, seed)


def stratified_kfold_split(labels, k: int, seed: int) -> FoldPlan:
    """Per-class dealing with a global rotating cursor; sizes stay within 1."""
    labels = np.asarray(labels)
    n = labels.shape[0]
    if k < 2:
        raise InvalidFolds(f"need at least 2 folds, got {k}")
    if k > n:
        raise InvalidFolds(f"{k} folds cannot cover {n} instances")
    rng = np.random.default_rng(seed)
    assignments = np.empty(n, dtype=int)
    cursor = 0
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        rng.shuffle(members)
        for idx in members:
            assignments[idx] = cursor % k
            cursor += 1
    return FoldPlan(n, k, assignments, seed)


def candidate_ks(d: int) -> list[int]:
    """Dense 1..200 then geometric x1.5 steps, always ending at d."""
    ks = list(range(1, min(d, 200) + 1))
    k = ks[-1]
    while k < d:
        k = min(d, math.ceil(k * 1.5))
        ks.append(k)
    return ks


def smallest_max_k(ks, accuracies) -> int:
    """The minimum K attaining the maximum accuracy (first argmax wins)."""
    return ks[int(np.argmax(accuracies))]


def _accuracy_curve(grid, ranking: RankedFeatures, holdout: Dataset, ks) -> list[float]:
    """Validation accuracy at each candidate K, streaming features by rank."""
    scores = np.tile(np.log(grid.priors), (holdout.n, 1))
    labels = holdout.labels
    accuracies = []
    targets = iter(ks)
    next_k = next(targets)
    for position, feature in enumerate(ranking.order, start=1):
        col = holdout.column(feature)
        for j in range(grid.n_classes):
            scores[:, j] += log_density(grid.marginals[feature][j], col)
        if position == next_k:
            accuracies.append(float(np.mean(np.argmax(scores, axis=1) == labels)))
            next_k = next(targets, None)
            if next_k is None:
                break
    return accuracies


def choose_k(train: Dataset, config: ExperimentConfig, seed) -> int:
    """Smallest K attaining the maximum internal-validation accuracy."""
    rng = np.random.default_rng(seed)
    n = train.n
    n_rank = int(round(0.8 * n))
    n_rank = min(max(n_rank, 1), n - 1)
    for _ in range(10):
        permutation = rng.permutation(n)
        rank_idx, val_idx = permutation[:n_rank], permutation[n_rank:]
        rank_classes = set(train.labels[rank_idx].tolist())
        val_classes = set(train.labels[val_idx].tolist())
        if rank_classes == val_classes == set(range(train.n_classes)):
            break
    else:
        raise StratificationError(
            "could not produce an 80/20 split covering every class in 10 tries"
        )
    rank_slice, val_slice = train.subset(rank_idx), train.subset(val_idx)
    grid, ranking = classifier.rank_features(rank_slice, config.model_config(None))
    ks = candidate_ks(train.d)
    curve = _accuracy_curve(grid, ranking, val_slice, ks)
    return smallest_max_k(ks, curve)


@dataclass
class FoldResult:
    fold: int
    model: NaiveBayesModel
    accuracy: float
    chosen_k: int
    n_test: int
    seconds: float


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    fold_accuracies: list[float]
    chosen_ks: list[int]
    selected: list[tuple[int, ...]]
    selected_scores: list[tuple[float, ...]]
    fold_test_sizes: list[int]
    timings: list[float]

    @property
    def mean_accuracy(self) -> float:
        return sum(self.fold_accuracies) / len(self.fold_accuracies)


def _featurize(source, config: ExperimentConfig):
    """Return (dataset, vocabulary) for either source kind."""
    if isinstance(source, Corpus):
        vocab = build_vocabulary(source.documents, config.stopwords, config.gamma)
        return featurize_corpus(source, vocab), vocab
    return source, None


def run_fold(
    source, config: ExperimentConfig, fold: int, train_idx, test_idx
) -> FoldResult:
    """Fit on the training indices, evaluate on the held-out ones.

    For corpus sources the vocabulary (and hence the feature space) is rebuilt
    from the training slice alone.
    """
    started = time.perf_counter()
    train_ds, vocab = _featurize(source.subset(train_idx), config)
    k = config.k if config.k is not None else choose_k(
        train_ds, config, np.random.SeedSequence([config.seed, fold])
    )
    model = classifier.fit(train_ds, config.model_config(k), vocabulary=vocab)
    test_source = source.subset(test_idx)
    if isinstance(test_source, Corpus):
        test_ds = featurize_corpus(test_source, vocab)
    else:
        test_ds = test_source
    acc = accuracy(model, test_ds)
    return FoldResult(
        fold=fold,
        model=model,
        accuracy=acc,
        chosen_k=k,
        n_test=len(test_idx),
        seconds=time.perf_counter() - started,
    )


def cross_validate(source, config: ExperimentConfig) -> ExperimentReport:
    """K-fold protocol: per-fold fit (auto-K included) and held-out accuracy."""
    labels = np.asarray(source.labels)
    counts = np.bincount(labels, minlength=len(source.label_map))
    deficient = [
        source.label_map.names[c] for c in range(len(counts)) if counts[c] < config.folds
    ]
    if deficient:
        raise InvalidFolds(
            f"classes {deficient} have fewer instances than folds={config.folds}"
        )
    if config.stratified:
        plan = stratified_kfold_split(labels, config.folds, config.seed)
    else:
        plan = kfold_split(source.n, config.folds, config.seed)
    report = ExperimentReport(config, [], [], [], [], [], [])
    for fold in range(config.folds):
        try:
            result = run_fold(
                source, config, fold, plan.train_indices(fold), plan.test_indices(fold)
            )
        except Exception as err:
            raise type(err)(f"fold {fold}: {err}") from err
        report.fold_accuracies.append(result.accuracy)
        report.chosen_ks.append(result.chosen_k)
        report.selected.append(result.model.selected)
        ranking = result.model.ranking
        report.selected_scores.append(
            tuple(float(ranking.scores[i]) for i in result.model.selected)
        )
        report.fold_test_sizes.append(result.n_test)
        report.timings.append(result.seconds)
    return report


def render_report(report: ExperimentReport) -> str:
    """Deterministic text form: CSV sections under `#` comment headers.

    Wall-clock timings are deliberately left out so that identical runs render
    identical bytes; they live on the report object.
    """
    config = report.config
    lines = [
        "# memd cross-validation report v1",
        "# config: method={} orders={} support={} k={} smoothing={!r} "
        "variance_floor={!r} gamma={} folds={} seed={} stratified={} stopwords={}".format(
            config.method,
            "+".join(str(o) for o in config.orders),
            config.support,
            "auto" if config.k is None else config.k,
            config.smoothing,
            config.variance_floor,
            config.gamma,
            config.folds,
            config.seed,
            str(config.stratified).lower(),
            len(config.stopwords),
        ),
        "# section: folds",
        "fold,n_test,chosen_k,accuracy",
    ]
    for fold in range(len(report.fold_accuracies)):
        lines.append(
            f"{fold},{report.fold_test_sizes[fold]},{report.chosen_ks[fold]},"
            f"{report.fold_accuracies[fold]!r}"
        )
    lines += [
        "# section: summary",
        "folds,mean_accuracy",
        f"{len(report.fold_accuracies)},{report.mean_accuracy!r}",
        "# section: selected_features",
        "fold,rank,feature_id,score",
    ]
    for fold, (features, scores) in enumerate(zip(report.selected, report.selected_scores)):
        for rank, (feature, score) in enumerate(zip(features, scores), start=1):
            lines.append(f"{fold},{rank},{feature},{score!r}")
    return "\n".join(lines) + "\n"


def fit_full(source, config: ExperimentConfig) -> NaiveBayesModel:
    """Fit one model on all the data, resolving auto-K internally."""
    dataset, vocab = _featurize(source, config)
    k = config.k if config.k is not None else choose_k(
        dataset, config, np.random.SeedSequence([config.seed, -1])
    )
    return classifier.fit(dataset, config.model_config(k), vocabulary=vocab)


def rank_full(source, config: ExperimentConfig) -> RankedFeatures:
    """Rank every feature on all the data."""
    dataset, _ = _featurize(source, config)
    _, ranking = classifier.rank_features(dataset, config.model_config(None))
    return ranking


def predict_source(model: NaiveBayesModel, source) -> tuple[np.ndarray, np.ndarray]:
    """Predicted class ids and log posteriors for a dataset or corpus."""
    if isinstance(source, Corpus):
        if model.vocabulary is None:
            raise ConfigError("model has no vocabulary; it cannot score raw text")
        dataset = featurize_corpus(source, model.vocabulary)
    else:
        dataset = source
    if dataset.d != model.d:
        raise ConfigError(f"data has {dataset.d} features but the model expects {model.d}")
    posteriors = log_posterior_matrix(model, dataset.X)
    return np.argmax(posteriors, axis=1), posteriors
