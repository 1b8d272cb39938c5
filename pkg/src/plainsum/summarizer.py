"""Sentence scoring and extractive-summary selection.

The built-in scorer is a regularized logistic model over hand-crafted
surface features, trained on the Jaccard-matched sentence labels. It is
deliberately small: heavyweight neural scorers plug in through the
external-scorer protocol instead (see ``plainsum.protocol``) and are
interchangeable behind the same score contract (one probability in
[0, 1] per sentence).

Selection keeps every sentence scoring above the threshold, in document
order; when nothing clears the threshold the single best-scoring
sentence is kept so downstream assembly always has a non-empty summary.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .corpus import Sentence
from .errors import DataError
from .sentmatch import LabeledSentence, LabeledSentenceDataset

FEATURE_NAMES = (
    "relative_position",
    "token_count",
    "type_token_ratio",
    "centroid_overlap",
    "numeric_ratio",
    "starts_result_cue",
    "starts_conclusion_cue",
)

_RESULT_CUES = frozenset({"result", "results", "finding", "findings", "outcomes"})
_CONCLUSION_CUES = frozenset({"conclusion", "conclusions", "overall"})


@dataclass(frozen=True)
class SentenceFeatures:
    relative_position: float
    token_count: float
    type_token_ratio: float
    centroid_overlap: float
    numeric_ratio: float
    starts_result_cue: bool
    starts_conclusion_cue: bool

    def as_vector(self) -> tuple[float, ...]:
        return (
            self.relative_position,
            self.token_count,
            self.type_token_ratio,
            self.centroid_overlap,
            self.numeric_ratio,
            float(self.starts_result_cue),
            float(self.starts_conclusion_cue),
        )


def featurize(sentence: Sentence, doc: Sequence[Sentence]) -> SentenceFeatures:
    """Deterministic surface features for one sentence in its document.

    ``centroid_overlap`` is the cosine similarity between the sentence's
    token-frequency vector and the document-wide token-frequency vector
    (all sentences, the scored one included).
    """
    if not any(s.index == sentence.index for s in doc):
        raise DataError(f"sentence {sentence.index} does not belong to the document")
    m = len(doc)
    relative_position = sentence.index / (m - 1) if m > 1 else 0.0
    tokens = sentence.tokens
    token_count = len(tokens)
    type_token_ratio = len(set(tokens)) / token_count if token_count else 0.0
    numeric_ratio = sum(t.isdigit() for t in tokens) / token_count if token_count else 0.0

    doc_counts: dict[str, int] = {}
    for sent in doc:
        for tok in sent.tokens:
            doc_counts[tok] = doc_counts.get(tok, 0) + 1
    sent_counts: dict[str, int] = {}
    for tok in tokens:
        sent_counts[tok] = sent_counts.get(tok, 0) + 1
    dot = sum(count * doc_counts[tok] for tok, count in sent_counts.items())
    norm_sent = math.sqrt(sum(c * c for c in sent_counts.values()))
    norm_doc = math.sqrt(sum(c * c for c in doc_counts.values()))
    centroid_overlap = dot / (norm_sent * norm_doc) if norm_sent and norm_doc else 0.0

    first = tokens[0] if tokens else ""
    bigram = tokens[:2]
    return SentenceFeatures(
        relative_position=relative_position,
        token_count=float(token_count),
        type_token_ratio=type_token_ratio,
        centroid_overlap=centroid_overlap,
        numeric_ratio=numeric_ratio,
        starts_result_cue=first in _RESULT_CUES,
        starts_conclusion_cue=first in _CONCLUSION_CUES
        or list(bigram) == ["in", "conclusion"],
    )


@dataclass
class TrainConfig:
    seed: int = 42
    epochs: int = 300
    learning_rate: float = 0.1
    l2: float = 1e-4


class SentenceScorer(Protocol):
    def score_document(self, doc: Sequence[Sentence], doc_id: str = "") -> list[float]: ...


@dataclass
class SentenceScorerModel:
    """Logistic scorer: weights over standardized features plus a bias."""

    weights: np.ndarray
    bias: float
    feature_means: np.ndarray
    feature_stds: np.ndarray
    feature_names: tuple[str, ...] = FEATURE_NAMES
    metadata: dict = field(default_factory=dict)

    def predict_proba(self, raw_features: np.ndarray) -> np.ndarray:
        standardized = (raw_features - self.feature_means) / self.feature_stds
        logits = standardized @ self.weights + self.bias
        return 1.0 / (1.0 + np.exp(-logits))

    def score_document(self, doc: Sequence[Sentence], doc_id: str = "") -> list[float]:
        raw = np.array([featurize(s, doc).as_vector() for s in doc], dtype=np.float64)
        return [float(p) for p in self.predict_proba(raw)]

    def save(self, path: str | Path) -> None:
        payload = {
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "feature_means": self.feature_means.tolist(),
            "feature_stds": self.feature_stds.tolist(),
            "feature_names": list(self.feature_names),
            "metadata": self.metadata,
        }
        Path(path).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "SentenceScorerModel":
        path = Path(path)
        if not path.exists():
            raise DataError(f"model file not found: {path}")
        payload = json.loads(path.read_text(encoding="utf-8"))
        return cls(
            weights=np.array(payload["weights"], dtype=np.float64),
            bias=float(payload["bias"]),
            feature_means=np.array(payload["feature_means"], dtype=np.float64),
            feature_stds=np.array(payload["feature_stds"], dtype=np.float64),
            feature_names=tuple(payload["feature_names"]),
            metadata=payload.get("metadata", {}),
        )


def _dataset_matrix(dataset: LabeledSentenceDataset, split: str) -> tuple[np.ndarray, np.ndarray]:
    rows: list[tuple[float, ...]] = []
    labels: list[int] = []
    for doc_entries in dataset.documents(split):
        doc = [entry.sentence for entry in doc_entries]
        for entry in doc_entries:
            rows.append(featurize(entry.sentence, doc).as_vector())
            labels.append(entry.label)
    return np.array(rows, dtype=np.float64), np.array(labels, dtype=np.float64)


def train_classifier(
    dataset: LabeledSentenceDataset,
    config: TrainConfig | None = None,
    split: str = "train",
) -> SentenceScorerModel:
    """Fit the logistic scorer with full-batch gradient descent.

    Deterministic for a fixed seed: initial weights come from a seeded
    generator and the optimization itself has no randomness. With a small
    enough learning rate the recorded loss history is non-increasing.
    """
    config = config or TrainConfig()
    features, labels = _dataset_matrix(dataset, split)
    if features.size == 0:
        raise DataError(f"no training sentences in split {split!r}")
    classes = set(labels.tolist())
    if classes != {0.0, 1.0}:
        raise DataError(
            f"training needs both classes; split {split!r} has labels {sorted(classes)}"
        )

    means = features.mean(axis=0)
    stds = features.std(axis=0)
    stds[stds == 0.0] = 1.0
    x = (features - means) / stds
    y = labels
    n = len(y)

    rng = np.random.default_rng(config.seed)
    weights = rng.normal(0.0, 0.01, size=x.shape[1])
    bias = 0.0
    loss_history: list[float] = []
    for _ in range(config.epochs):
        logits = x @ weights + bias
        probs = 1.0 / (1.0 + np.exp(-logits))
        eps = 1e-12
        loss = float(
            -np.mean(y * np.log(probs + eps) + (1 - y) * np.log(1 - probs + eps))
            + 0.5 * config.l2 * float(weights @ weights)
        )
        loss_history.append(loss)
        grad_w = x.T @ (probs - y) / n + config.l2 * weights
        grad_b = float(np.mean(probs - y))
        weights = weights - config.learning_rate * grad_w
        bias = bias - config.learning_rate * grad_b

    return SentenceScorerModel(
        weights=weights,
        bias=bias,
        feature_means=means,
        feature_stds=stds,
        metadata={
            "seed": config.seed,
            "epochs": config.epochs,
            "learning_rate": config.learning_rate,
            "l2": config.l2,
            "train_split": split,
            "n_sentences": n,
            "loss_history": loss_history,
        },
    )


def evaluate_classifier(
    model: SentenceScorerModel, dataset: LabeledSentenceDataset, split: str = "dev"
) -> dict:
    """Accuracy/F1 of thresholded scores against the dataset labels."""
    features, labels = _dataset_matrix(dataset, split)
    if features.size == 0:
        raise DataError(f"no sentences in split {split!r}")
    predictions = (model.predict_proba(features) > 0.5).astype(np.float64)
    accuracy = float(np.mean(predictions == labels))
    tp = float(np.sum((predictions == 1) & (labels == 1)))
    fp = float(np.sum((predictions == 1) & (labels == 0)))
    fn = float(np.sum((predictions == 0) & (labels == 1)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    majority = max(float(np.mean(labels)), 1.0 - float(np.mean(labels)))
    return {
        "split": split,
        "n_sentences": int(len(labels)),
        "accuracy": accuracy,
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "majority_baseline": majority,
    }


@dataclass(frozen=True)
class ExtractiveSummary:
    doc_id: str
    selected: tuple[Sentence, ...]
    scores: tuple[float, ...]

    def __post_init__(self):
        if not self.selected:
            raise DataError(f"doc {self.doc_id!r}: extractive summary must be non-empty")
        indices = [s.index for s in self.selected]
        if indices != sorted(indices):
            raise DataError(f"doc {self.doc_id!r}: selected sentences out of order")
        if len(self.scores) != len(self.selected):
            raise DataError(f"doc {self.doc_id!r}: scores misaligned with selection")

    @property
    def text(self) -> str:
        return " ".join(s.text for s in self.selected)


def extract_summary(
    doc: Sequence[Sentence],
    scorer: SentenceScorer,
    threshold: float = 0.5,
    doc_id: str = "",
) -> ExtractiveSummary:
    """Select sentences scoring strictly above the threshold, in order.

    Falls back to the single highest-scoring sentence (first index on
    ties) when no score clears the threshold.
    """
    if not doc:
        raise DataError(f"doc {doc_id!r}: cannot summarize an empty document")
    scores = scorer.score_document(doc, doc_id=doc_id)
    if len(scores) != len(doc):
        raise DataError(
            f"doc {doc_id!r}: scorer returned {len(scores)} scores for {len(doc)} sentences"
        )
    picked = [(s, score) for s, score in zip(doc, scores) if score > threshold]
    if not picked:
        best = max(range(len(doc)), key=lambda i: (scores[i], -i))
        picked = [(doc[best], scores[best])]
    return ExtractiveSummary(
        doc_id=doc_id,
        selected=tuple(s for s, _ in picked),
        scores=tuple(score for _, score in picked),
    )


class OracleScorer:
    """Scores straight from gold labels (1.0 positive, 0.0 negative)."""

    def __init__(self, labeled: Sequence[LabeledSentence]):
        self._labels = {entry.sentence.index: entry.label for entry in labeled}

    def score_document(self, doc: Sequence[Sentence], doc_id: str = "") -> list[float]:
        return [float(self._labels.get(s.index, 0)) for s in doc]


def oracle_extract(labeled: Sequence[LabeledSentence]) -> ExtractiveSummary:
    """Exactly the label-1 sentences, in original order."""
    if not labeled:
        raise DataError("cannot extract from an empty labeled document")
    positives = [entry for entry in labeled if entry.label == 1]
    if not positives:
        raise DataError(
            f"doc {labeled[0].doc_id!r}: all labels are 0; matching guarantees "
            "at least one positive per document"
        )
    return ExtractiveSummary(
        doc_id=labeled[0].doc_id,
        selected=tuple(entry.sentence for entry in positives),
        scores=tuple(1.0 for _ in positives),
    )
