"""Phenotype model: PCA-reduced pattern database with k-NN recognition.

Training stratifies a labeled pattern corpus into train/test per label,
fits a PCA basis on the training portion only (retaining a target fraction
of variance), stores the reduced training patterns as the k-NN database,
and records per-label held-out accuracy as the recognition baseline used
downstream for anomaly thresholds.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .imaging import QuantizationScale
from .patterns import PatternVector

MODEL_FORMAT_VERSION = 1


@dataclass
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")


@dataclass
class PhenotypeModel:
    scale: QuantizationScale
    mean: np.ndarray  # (P,)
    basis: np.ndarray  # (P, d) orthonormal principal directions
    explained_variance_ratio: np.ndarray  # (d,)
    database_vectors: np.ndarray  # (N, d) reduced training patterns
    database_labels: list[str]
    k: int
    baseline_accuracy: dict[str, float]
    config: dict

    @property
    def n_components(self) -> int:
        return self.basis.shape[1]

    def project(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[-1] != self.mean.shape[0]:
            raise ValueError(
                f"pattern dimension {coeffs.shape[-1]} does not match model dimension {self.mean.shape[0]}"
            )
        return (coeffs - self.mean) @ self.basis


def fit_pca(
    patterns: list[PatternVector] | np.ndarray, retention: float = 0.95
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Principal directions of a pattern corpus.

    Returns (mean, basis, ratios) where basis holds the smallest number of
    directions whose cumulative explained-variance ratio reaches the
    retention target. Each direction's largest-magnitude component is made
    positive so the decomposition is sign-deterministic.
    """
    if not 0.0 < retention <= 1.0:
        raise ValueError("retention must be in (0, 1]")
    data = _as_matrix(patterns)
    if data.shape[0] < 2:
        raise ValueError("need at least 2 patterns to fit a projection")
    mean = data.mean(axis=0)
    centered = data - mean
    cov = centered.T @ centered / (data.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    eigvecs = eigvecs[:, order]
    total = eigvals.sum()
    if total <= 0:
        raise ValueError("patterns are all identical; covariance is zero")
    ratios = eigvals / total
    cumulative = np.cumsum(ratios)
    n_keep = int(np.searchsorted(cumulative, retention - 1e-12) + 1)
    rank = int((eigvals > eigvals[0] * 1e-12).sum())
    n_keep = min(n_keep, rank)
    basis = eigvecs[:, :n_keep].copy()
    for col in range(basis.shape[1]):
        peak = np.argmax(np.abs(basis[:, col]))
        if basis[peak, col] < 0:
            basis[:, col] = -basis[:, col]
    return mean, basis, ratios[:n_keep]


def stratified_split(
    patterns: list[PatternVector], split: SplitSpec
) -> tuple[list[PatternVector], list[PatternVector]]:
    """Per-label shuffle and split; train counts land within 1 of the target fraction."""
    by_label: dict[str, list[PatternVector]] = {}
    for p in patterns:
        if p.label is None:
            raise ValueError("all patterns must be labeled for training")
        by_label.setdefault(p.label, []).append(p)
    rng = np.random.default_rng(split.seed)
    train: list[PatternVector] = []
    test: list[PatternVector] = []
    for label in sorted(by_label):
        group = by_label[label]
        perm = rng.permutation(len(group))
        n_train = int(round(split.train_fraction * len(group)))
        n_train = min(max(n_train, 1), len(group) - 1)
        for pos, idx in enumerate(perm):
            (train if pos < n_train else test).append(group[idx])
    return train, test


def train(
    patterns: list[PatternVector],
    split: SplitSpec,
    scale: QuantizationScale,
    retention: float = 0.95,
    k: int = 5,
    config: dict | None = None,
) -> PhenotypeModel:
    """Fit the full phenotype model from a labeled pattern corpus."""
    train_set, test_set = stratified_split(patterns, split)
    counts = Counter(p.label for p in train_set)
    for label in sorted({str(p.label) for p in patterns}):
        if counts.get(label, 0) < k:
            raise ValueError(
                f"label {label!r} has only {counts.get(label, 0)} training patterns; need at least k={k}"
            )
    mean, basis, ratios = fit_pca(train_set, retention)
    vectors = (_as_matrix(train_set) - mean) @ basis
    model = PhenotypeModel(
        scale=scale,
        mean=mean,
        basis=basis,
        explained_variance_ratio=ratios,
        database_vectors=vectors,
        database_labels=[p.label for p in train_set],  # type: ignore[misc]
        k=k,
        baseline_accuracy={},
        config=dict(config or {}),
    )
    model.config.setdefault("split_seed", split.seed)
    model.config.setdefault("train_fraction", split.train_fraction)
    model.config.setdefault("retention", retention)
    accuracy, _ = evaluate(model, test_set)
    model.baseline_accuracy = accuracy
    return model


def _vote(model: PhenotypeModel, d2: np.ndarray) -> str:
    """Majority label of the k nearest database entries given squared distances.

    Distance ties resolve by database insertion order; a majority tie
    resolves to the label of the nearest neighbor among the tied labels.
    """
    k = min(model.k, d2.shape[0])
    kth = np.partition(d2, k - 1)[k - 1]
    candidates = np.flatnonzero(d2 <= kth)  # insertion-ordered
    candidates = candidates[np.argsort(d2[candidates], kind="stable")][:k]
    votes = Counter(model.database_labels[i] for i in candidates)
    top = max(votes.values())
    tied = {label for label, n in votes.items() if n == top}
    if len(tied) == 1:
        return tied.pop()
    for i in candidates:
        if model.database_labels[i] in tied:
            return model.database_labels[i]
    raise AssertionError("unreachable: tied labels came from the candidate set")


def recognize(model: PhenotypeModel, pattern: PatternVector) -> str:
    """Label one pattern via k-NN in the PCA-reduced space."""
    return recognize_batch(model, [pattern])[0]


def recognize_batch(
    model: PhenotypeModel, patterns: list[PatternVector], chunk: int = 256
) -> list[str]:
    if not patterns:
        return []
    reduced = model.project(_as_matrix(patterns))
    db = model.database_vectors
    db_sq = (db * db).sum(axis=1)
    labels: list[str] = []
    for start in range(0, reduced.shape[0], chunk):
        block = reduced[start : start + chunk]
        d2 = db_sq[None, :] - 2.0 * (block @ db.T) + (block * block).sum(axis=1)[:, None]
        np.maximum(d2, 0.0, out=d2)
        labels.extend(_vote(model, row) for row in d2)
    return labels


def evaluate(
    model: PhenotypeModel, patterns: list[PatternVector]
) -> tuple[dict[str, float], dict[str, dict[str, int]]]:
    """Per-label accuracy and the full confusion matrix on a labeled pattern set."""
    confusion: dict[str, dict[str, int]] = {}
    for pattern, predicted in zip(patterns, recognize_batch(model, patterns)):
        row = confusion.setdefault(str(pattern.label), {})
        row[predicted] = row.get(predicted, 0) + 1
    accuracy = {
        label: row.get(label, 0) / sum(row.values()) for label, row in sorted(confusion.items())
    }
    return accuracy, confusion


def save_model(model: PhenotypeModel, path: str) -> None:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "scale": {"max_throughput": model.scale.max_throughput, "levels": model.scale.levels},
        "mean": model.mean.tolist(),
        "basis": model.basis.tolist(),
        "explained_variance_ratio": model.explained_variance_ratio.tolist(),
        "database_vectors": model.database_vectors.tolist(),
        "database_labels": model.database_labels,
        "k": model.k,
        "baseline_accuracy": model.baseline_accuracy,
        "config": model.config,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_model(path: str, expect_config: dict | None = None) -> PhenotypeModel:
    """Load a model file; refuses configs that disagree with the query pipeline."""
    with open(path) as fh:
        doc = json.load(fh)
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version!r}")
    config = doc["config"]
    if expect_config:
        for key, wanted in expect_config.items():
            if key in config and config[key] != wanted:
                raise ValueError(
                    f"model config mismatch: {key}={config[key]!r} in file, {wanted!r} requested"
                )
    return PhenotypeModel(
        scale=QuantizationScale(**doc["scale"]),
        mean=np.array(doc["mean"]),
        basis=np.array(doc["basis"]),
        explained_variance_ratio=np.array(doc["explained_variance_ratio"]),
        database_vectors=np.array(doc["database_vectors"]),
        database_labels=list(doc["database_labels"]),
        k=int(doc["k"]),
        baseline_accuracy={str(k_): float(v) for k_, v in doc["baseline_accuracy"].items()},
        config=config,
    )


def _as_matrix(patterns: list[PatternVector] | np.ndarray) -> np.ndarray:
    if isinstance(patterns, np.ndarray):
        return np.asarray(patterns, dtype=float)
    return np.stack([np.asarray(p.coeffs, dtype=float) for p in patterns])
