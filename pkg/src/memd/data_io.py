"""Dataset ingestion: text corpora, dense CSV, and sparse instance files.

Text preprocessing follows the fixed recipe: lowercase, split on
non-alphanumeric characters, drop stop words and words whose corpus frequency
falls below the cut-off gamma, then weight each document by normalized term
frequency W_ij = count(w_i, D_j) / sum_k count(w_k, D_j), with the denominator
running over retained-vocabulary words present in the document so every
non-empty row is a distribution over words.

All loaders are strict: any malformed line raises ParseError with its line
number. Vocabulary ids are assigned in lexicographic word order, so identical
inputs produce identical datasets regardless of processing order.
"""

from __future__ import annotations

import csv
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, EmptyVocabulary, ParseError

logger = logging.getLogger(__name__)

_TOKEN = re.compile(r"[a-z0-9]+")

DEFAULT_GAMMA = 2


@dataclass(frozen=True)
class LabelMap:
    """Class id <-> class name, ids in first-appearance order."""

    names: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("label names must be unique")

    def __len__(self) -> int:
        return len(self.names)

    def id_of(self, name: str) -> int:
        return self.names.index(name)


@dataclass
class Dataset:
    """Labeled instances with a fixed feature count.

    `X` is a dense ndarray or a CSR matrix of shape (n, d); `labels` holds
    integer class ids indexing into `label_map`.
    """

    X: np.ndarray | sp.csr_matrix
    labels: np.ndarray
    label_map: LabelMap

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=int)
        if self.X.shape[0] != self.labels.shape[0]:
            raise ValueError("one label per instance required")
        if self.labels.size and self.labels.max() >= len(self.label_map):
            raise ValueError("label id outside the label map")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.label_map)

    def column(self, i: int) -> np.ndarray:
        col = self.X[:, i]
        if sp.issparse(col):
            return np.asarray(col.todense()).ravel()
        return np.asarray(col).ravel()

    def subset(self, indices) -> "Dataset":
        return Dataset(self.X[indices], self.labels[indices], self.label_map)


@dataclass
class Corpus:
    """Tokenized documents with labels; featurized per experiment."""

    documents: list  # list[list[str]]
    labels: np.ndarray
    label_map: LabelMap

    @property
    def n(self) -> int:
        return len(self.documents)

    def subset(self, indices) -> "Corpus":
        return Corpus(
            [self.documents[int(i)] for i in indices],
            np.asarray(self.labels)[indices],
            self.label_map,
        )


@dataclass(frozen=True)
class Vocabulary:
    words: tuple[str, ...]
    index: dict = field(repr=False)

    def __len__(self) -> int:
        return len(self.words)

    @classmethod
    def from_words(cls, words) -> "Vocabulary":
        words = tuple(words)
        return cls(words, {w: i for i, w in enumerate(words)})


def tokenize(raw: str) -> list[str]:
    """Lowercase and split on non-alphanumeric characters."""
    return _TOKEN.findall(raw.lower())


def build_vocabulary(documents, stopwords=(), gamma: int = DEFAULT_GAMMA) -> Vocabulary:
    """Retain non-stopword tokens with corpus frequency >= gamma.

    Word ids are assigned in lexicographic order.
    """
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    stopwords = set(stopwords)
    counts = Counter()
    for doc in documents:
        counts.update(doc)
    kept = sorted(w for w, c in counts.items() if c >= gamma and w not in stopwords)
    if not kept:
        raise EmptyVocabulary(
            f"no words survive gamma={gamma} and {len(stopwords)} stop words"
        )
    return Vocabulary.from_words(kept)


def tf_weights(document, vocab: Vocabulary) -> dict[int, float]:
    """Normalized term frequencies of one document over the vocabulary.

    Returns a sparse {feature id: weight} row summing to 1, or an empty dict
    when the document contains no in-vocabulary token (flagged by the caller,
    not an error).
    """
    counts = Counter(w for w in document if w in vocab.index)
    total = sum(counts.values())
    if total == 0:
        return {}
    return {vocab.index[w]: c / total for w, c in counts.items()}


def corpus_matrix(documents, vocab: Vocabulary) -> sp.csr_matrix:
    """Stack tf_weights rows into a CSR matrix, logging all-zero rows."""
    data, indices, indptr = [], [], [0]
    flagged = 0
    for doc in documents:
        row = tf_weights(doc, vocab)
        if not row:
            flagged += 1
        for fid in sorted(row):
            indices.append(fid)
            data.append(row[fid])
        indptr.append(len(data))
    if flagged:
        logger.warning("%d documents contain no in-vocabulary words", flagged)
    return sp.csr_matrix(
        (np.array(data), np.array(indices, dtype=np.int32), np.array(indptr)),
        shape=(len(documents), len(vocab)),
    )


def featurize_corpus(corpus: Corpus, vocab: Vocabulary) -> Dataset:
    return Dataset(corpus_matrix(corpus.documents, vocab), corpus.labels, corpus.label_map)


def _label_ids(names: list[str]) -> tuple[np.ndarray, LabelMap]:
    seen: dict[str, int] = {}
    ids = np.empty(len(names), dtype=int)
    for i, name in enumerate(names):
        if name not in seen:
            seen[name] = len(seen)
        ids[i] = seen[name]
    return ids, LabelMap(tuple(seen))


def load_corpus_text(text: str) -> Corpus:
    """Parse a corpus: one document per line, `label<TAB>raw text`."""
    names, documents = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        label, sep, body = line.partition("\t")
        if not sep:
            raise ParseError("expected `label<TAB>text`", line=lineno)
        if not label.strip():
            raise ParseError("empty label", line=lineno)
        names.append(label.strip())
        documents.append(tokenize(body))
    if not documents:
        raise ParseError("corpus contains no documents", line=1)
    ids, label_map = _label_ids(names)
    return Corpus(documents, ids, label_map)


def load_corpus(path) -> Corpus:
    with open(path, encoding="utf-8") as fh:
        return load_corpus_text(fh.read())


def _parse_cell(cell: str, lineno: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"non-numeric cell {cell!r}", line=lineno) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite cell {cell!r}", line=lineno)
    return value


def load_dense_csv_text(text: str) -> Dataset:
    """Parse dense CSV with mandatory `label,f1,...,fd` header."""
    rows = list(csv.reader(text.splitlines()))
    if not rows or not rows[0] or rows[0][0] != "label":
        raise ParseError("missing `label,f1,...` header", line=1)
    d = len(rows[0]) - 1
    if d < 1:
        raise ParseError("header declares no feature columns", line=1)
    names, data = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != d + 1:
            raise ParseError(f"expected {d + 1} cells, found {len(row)}", line=lineno)
        names.append(row[0])
        data.append([_parse_cell(c, lineno) for c in row[1:]])
    if not data:
        raise ParseError("no data rows", line=1)
    ids, label_map = _label_ids(names)
    return Dataset(np.array(data, dtype=float), ids, label_map)


def load_dense_csv(path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        return load_dense_csv_text(fh.read())


def write_dense_csv(dataset: Dataset, path):
    """Write a dense dataset back out with full-precision reals."""
    X = dataset.X
    if sp.issparse(X):
        X = np.asarray(X.todense())
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("label," + ",".join(f"f{i + 1}" for i in range(dataset.d)) + "\n")
        for row, label in zip(X, dataset.labels):
            cells = ",".join(repr(float(v)) for v in row)
            fh.write(f"{dataset.label_map.names[label]},{cells}\n")


def load_sparse_text(text: str, n_features: int | None = None) -> Dataset:
    """Parse sparse instance lines: `<label> <fid>:<value> ...`, fids 1-based.

    Feature ids must be strictly ascending within a line; absent features are
    zero. The dimensionality is the largest fid seen unless `n_features`
    pins it (ids beyond a pinned dimensionality are parse errors).
    """
    names, row_entries = [], []
    max_fid = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if not parts:
            continue
        names.append(parts[0])
        entries = []
        previous = 0
        for pair in parts[1:]:
            fid_str, sep, value_str = pair.partition(":")
            if not sep:
                raise ParseError(f"malformed pair {pair!r}", line=lineno)
            try:
                fid = int(fid_str)
            except ValueError:
                raise ParseError(f"bad feature id {fid_str!r}", line=lineno) from None
            if fid < 1:
                raise ParseError(f"feature ids are 1-based, got {fid}", line=lineno)
            if fid <= previous:
                raise ParseError(
                    f"feature id {fid} not ascending after {previous}", line=lineno
                )
            if n_features is not None and fid > n_features:
                raise ParseError(
                    f"feature id {fid} exceeds dimensionality {n_features}", line=lineno
                )
            entries.append((fid, _parse_cell(value_str, lineno)))
            previous = fid
        max_fid = max(max_fid, previous)
        row_entries.append(entries)
    if not row_entries:
        raise ParseError("no instances", line=1)
    d = n_features if n_features is not None else max_fid
    if d == 0:
        raise ParseError("no feature ids anywhere in the file", line=1)
    data, indices, indptr = [], [], [0]
    for entries in row_entries:
        for fid, value in entries:
            indices.append(fid - 1)
            data.append(value)
        indptr.append(len(data))
    ids, label_map = _label_ids(names)
    X = sp.csr_matrix(
        (np.array(data), np.array(indices, dtype=np.int32), np.array(indptr)),
        shape=(len(row_entries), d),
    )
    return Dataset(X, ids, label_map)


def load_sparse(path, n_features: int | None = None) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        return load_sparse_text(fh.read(), n_features)


def read_stopwords_text(text: str) -> frozenset[str]:
    """One lowercase word per line; blank lines ignored."""
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip())


def read_stopwords(path) -> frozenset[str]:
    with open(path, encoding="utf-8") as fh:
        return read_stopwords_text(fh.read())


def load_any_text(text: str, format: str) -> Dataset | Corpus:
    """Dispatch on the CLI/service `format` value."""
    if format == "csv":
        return load_dense_csv_text(text)
    if format == "sparse":
        return load_sparse_text(text)
    if format == "corpus":
        return load_corpus_text(text)
    raise ConfigError(f"unknown data format {format!r}")
