"""Character n-gram text classifiers for the two cross-cutting filters:
the language/variant identifier and the binary quality checker.

Both are multinomial logistic regression over character n-gram counts
(1..3-grams by default), trained by seeded mini-batch gradient descent
on cross-entropy with L2 regularization. Weights start at zero, so an
untrained model predicts the uniform distribution and class order is
a pure relabeling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Corpus, TextChunk, relabel
from .errors import (
    ContractError,
    CoverageError,
    EmptyInputError,
    FormatError,
    LabelError,
)
from .normalize import normalize_text
from .prf import EvalReport, score_labels

HIGH_QUALITY = "high-quality"
LOW_QUALITY = "low-quality"
QUALITY_LABELSET = (HIGH_QUALITY, LOW_QUALITY)

# Default inventory for the variant identifier: the three macro-variants
# plus the neighbor language most likely to contaminate a crawl.
DEFAULT_VARIANT_LABELS = ("logudorese", "campidanese", "mesania", "italian", "other")


@dataclass(frozen=True)
class LabelSet:
    labels: tuple

    def __init__(self, labels: Iterable[str]):
        labels = tuple(labels)
        if not labels:
            raise FormatError("label set must be non-empty")
        if len(set(labels)) != len(labels):
            raise FormatError("label set contains duplicates")
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LabelError(f"label {label!r} not in {self.labels}") from None


@dataclass(frozen=True)
class NgramFeatureSpace:
    """Dense index over the character n-grams observed in training."""

    n_low: int
    n_high: int
    feature_index: dict

    def __post_init__(self):
        if not 1 <= self.n_low <= self.n_high:
            raise FormatError("need 1 <= n_low <= n_high")
        indices = sorted(self.feature_index.values())
        if indices != list(range(len(self.feature_index))):
            raise FormatError("feature indices must be dense")
        for gram in self.feature_index:
            if not self.n_low <= len(gram) <= self.n_high:
                raise FormatError(f"n-gram {gram!r} outside length range")

    def __len__(self):
        return len(self.feature_index)


def _char_ngrams(text: str, n_low: int, n_high: int):
    for n in range(n_low, n_high + 1):
        for i in range(len(text) - n + 1):
            yield text[i : i + n]


def build_feature_space(
    texts: Iterable[str], n_low: int = 1, n_high: int = 3
) -> NgramFeatureSpace:
    grams = sorted({
        g for text in texts for g in _char_ngrams(normalize_text(text), n_low, n_high)
    })
    return NgramFeatureSpace(
        n_low=n_low,
        n_high=n_high,
        feature_index={g: i for i, g in enumerate(grams)},
    )


def featurize(space: NgramFeatureSpace, text: str) -> dict:
    """Sparse counts of in-space n-grams; unknown n-grams are ignored."""
    counts = {}
    for gram in _char_ngrams(normalize_text(text), space.n_low, space.n_high):
        col = space.feature_index.get(gram)
        if col is not None:
            counts[col] = counts.get(col, 0) + 1
    return counts


def _featurize_dense(space: NgramFeatureSpace, texts: Sequence[str]) -> np.ndarray:
    X = np.zeros((len(texts), len(space)), dtype=np.float64)
    for row, text in enumerate(texts):
        for col, count in featurize(space, text).items():
            X[row, col] = count
    return X


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    learning_rate: float = 0.1
    l2: float = 1e-4
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise FormatError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise FormatError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.l2 < 0:
            raise FormatError(f"l2 must be >= 0, got {self.l2}")
        if self.batch_size < 1:
            raise FormatError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass(frozen=True)
class LinearTextClassifier:
    weights: np.ndarray  # |labels| x |features|
    bias: np.ndarray  # |labels|
    labelset: LabelSet
    featurespace: NgramFeatureSpace
    train_config: TrainConfig
    train_loss_history: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.weights.shape != (len(self.labelset), len(self.featurespace)):
            raise FormatError(
                f"weight shape {self.weights.shape} inconsistent with "
                f"{len(self.labelset)} labels x {len(self.featurespace)} features"
            )
        if self.bias.shape != (len(self.labelset),):
            raise FormatError("bias shape inconsistent with label count")


def softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - np.max(scores, axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=-1, keepdims=True)


def loss_and_gradient(
    X: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
    bias: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy plus L2 penalty, with its analytic gradient.

    The L2 term is 0.5 * l2 * ||W||^2; the bias is not penalized.
    """
    n = X.shape[0]
    probs = softmax(X @ weights.T + bias)
    nll = -np.mean(np.log(probs[np.arange(n), y]))
    loss = nll + 0.5 * l2 * float(np.sum(weights * weights))
    delta = probs
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grad_w = delta.T @ X + l2 * weights
    grad_b = delta.sum(axis=0)
    return float(loss), grad_w, grad_b


def train_classifier(
    data: Sequence[tuple],
    labelset: LabelSet,
    config: TrainConfig = TrainConfig(),
    featurespace: NgramFeatureSpace | None = None,
) -> LinearTextClassifier:
    """Fit multinomial logistic regression on (chunk_or_text, label) pairs.

    Deterministic for a given seed and data order. Every label must
    belong to the label set and every class needs at least one example.
    """
    if not data:
        raise EmptyInputError("no training data")
    texts = [
        item.text if isinstance(item, TextChunk) else str(item)
        for item, _ in data
    ]
    y = np.array([labelset.index(label) for _, label in data], dtype=np.int64)
    present = set(y.tolist())
    missing = [l for i, l in enumerate(labelset.labels) if i not in present]
    if missing:
        raise CoverageError(f"labels with zero training examples: {missing}")

    if featurespace is None:
        featurespace = build_feature_space(texts)
    X = _featurize_dense(featurespace, texts)

    n_labels, n_features = len(labelset), len(featurespace)
    weights = np.zeros((n_labels, n_features), dtype=np.float64)
    bias = np.zeros(n_labels, dtype=np.float64)
    rng = np.random.default_rng(config.seed)
    history = []
    for _ in range(config.epochs):
        order = rng.permutation(len(texts))
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            _, grad_w, grad_b = loss_and_gradient(
                X[batch], y[batch], weights, bias, config.l2
            )
            weights -= config.learning_rate * grad_w
            bias -= config.learning_rate * grad_b
        epoch_loss, _, _ = loss_and_gradient(X, y, weights, bias, config.l2)
        history.append(epoch_loss)

    return LinearTextClassifier(
        weights=weights,
        bias=bias,
        labelset=labelset,
        featurespace=featurespace,
        train_config=config,
        train_loss_history=tuple(history),
    )


def predict(model: LinearTextClassifier, text: str) -> tuple[str, np.ndarray]:
    """Most probable label and the full probability vector.

    Probabilities are the softmax of the linear scores; argmax ties
    break toward the lowest label index.
    """
    x = np.zeros(len(model.featurespace), dtype=np.float64)
    for col, count in featurize(model.featurespace, text).items():
        x[col] = count
    probs = softmax(model.weights @ x + model.bias)
    return model.labelset.labels[int(np.argmax(probs))], probs


def evaluate_classifier(
    model: LinearTextClassifier,
    data: Sequence[tuple],
    exclude_absent_from_macro: bool = True,
) -> EvalReport:
    """Per-label P/R/F1 with macro and micro aggregates on labeled data."""
    if not data:
        raise EmptyInputError("cannot evaluate on empty data")
    gold, predicted = [], []
    for item, label in data:
        text = item.text if isinstance(item, TextChunk) else str(item)
        gold.append(label)
        predicted.append(predict(model, text)[0])
    return score_labels(gold, predicted, model.labelset.labels,
                        exclude_absent_from_macro)


def filter_corpus(
    model: LinearTextClassifier, corpus: Corpus, threshold: float = 0.5
) -> Corpus:
    """Keep chunks whose P(high-quality) clears the threshold.

    Every surviving chunk gets its quality field set from the threshold
    decision. Requires a binary quality model.
    """
    if tuple(model.labelset.labels) != QUALITY_LABELSET:
        raise ContractError(
            f"quality filter needs labelset {QUALITY_LABELSET}, "
            f"got {model.labelset.labels}"
        )
    if not 0.0 <= threshold <= 1.0:
        raise ContractError(f"threshold must lie in [0, 1], got {threshold}")
    high_col = model.labelset.index(HIGH_QUALITY)
    kept = []
    for chunk in corpus:
        p_high = predict(model, chunk.text)[1][high_col]
        if p_high >= threshold:
            kept.append(relabel(chunk, quality="high"))
    return Corpus(kept)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def save_model(model: LinearTextClassifier, path: str | Path) -> None:
    payload = {
        "labels": list(model.labelset.labels),
        "n_range": [model.featurespace.n_low, model.featurespace.n_high],
        "feature_index": model.featurespace.feature_index,
        "weights": model.weights.tolist(),
        "bias": model.bias.tolist(),
        "train_config": {
            "epochs": model.train_config.epochs,
            "learning_rate": model.train_config.learning_rate,
            "l2": model.train_config.l2,
            "batch_size": model.train_config.batch_size,
            "seed": model.train_config.seed,
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False)
        fh.write("\n")


def load_model(path: str | Path) -> LinearTextClassifier:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        space = NgramFeatureSpace(
            n_low=payload["n_range"][0],
            n_high=payload["n_range"][1],
            feature_index=dict(payload["feature_index"]),
        )
        config = TrainConfig(**payload["train_config"])
        return LinearTextClassifier(
            weights=np.array(payload["weights"], dtype=np.float64),
            bias=np.array(payload["bias"], dtype=np.float64),
            labelset=LabelSet(payload["labels"]),
            featurespace=space,
            train_config=config,
        )
    except KeyError as exc:
        raise FormatError(f"classifier file missing key {exc}") from exc
