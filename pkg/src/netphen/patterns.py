"""Sliding-window snippets and Pearson-correlation communication patterns.

A run's T x 20 feature series is sliced by a stride-1 window of T_S seconds
into T - T_S + 1 snippets. Each snippet becomes a pattern vector of the
pairwise Pearson coefficients between its 20 feature columns: the strict
upper triangle (190 values) by default, or 210 with the diagonal included.
Zero-variance columns (idle periods quantize to constant images) correlate
as 0 by convention so patterns stay finite and comparable.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .texture import N_FEATURES


@dataclass
class FeatureSeries:
    app_label: str
    run_id: int
    values: np.ndarray  # (T, 20)


@dataclass
class Snippet:
    window: np.ndarray  # (T_S, 20) consecutive feature rows
    start_t: int


@dataclass
class PatternVector:
    coeffs: np.ndarray
    label: str | None = None
    include_diagonal: bool = False
    run_id: int = 0
    start_t: int = 0

    def __len__(self) -> int:
        return self.coeffs.size


def pattern_length(n_features: int = N_FEATURES, include_diagonal: bool = False) -> int:
    base = n_features * (n_features - 1) // 2
    return base + n_features if include_diagonal else base


def slice_series(series: FeatureSeries, window_s: int) -> list[Snippet]:
    """All stride-1 windows of window_s rows; exactly T - window_s + 1 snippets."""
    values = np.asarray(series.values)
    n_t = values.shape[0]
    if window_s < 2:
        raise ValueError("window must cover at least 2 samples")
    if window_s > n_t:
        raise ValueError(f"window of {window_s}s exceeds series length {n_t}s")
    return [Snippet(window=values[s : s + window_s], start_t=s) for s in range(n_t - window_s + 1)]


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson correlation of two equal-length series.

    Returns 0.0 when either series has zero variance, and clamps to [-1, 1]
    against float rounding.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("series must be 1-D and of equal length")
    if x.size < 2:
        raise ValueError("series must hold at least 2 samples")
    if x.max() == x.min() or y.max() == y.min():
        return 0.0
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt((xc * xc).sum() * (yc * yc).sum())
    if denom == 0.0:
        return 0.0
    return float(np.clip((xc * yc).sum() / denom, -1.0, 1.0))


def _correlation_matrix(window: np.ndarray) -> np.ndarray:
    """Correlation matrix over columns with the zero-variance-column convention.

    A column is constant when its max equals its min; exact equality keeps
    the convention independent of float rounding in the mean.
    """
    constant = window.max(axis=0) == window.min(axis=0)
    centered = window - window.mean(axis=0)
    centered[:, constant] = 0.0
    norms = np.sqrt((centered * centered).sum(axis=0))
    cov = centered.T @ centered
    denom = np.outer(norms, norms)
    corr = np.zeros_like(cov)
    np.divide(cov, denom, out=corr, where=denom > 0)
    return np.clip(corr, -1.0, 1.0)


def pattern_of(
    snippet: Snippet,
    label: str | None = None,
    include_diagonal: bool = False,
    run_id: int = 0,
) -> PatternVector:
    """Pattern vector of one snippet: pairwise coefficients in lexicographic (i, j) order.

    Diagonal entries, when included, are 1 for non-constant columns and 0
    for zero-variance columns, matching the pairwise convention.
    """
    window = np.asarray(snippet.window, dtype=float)
    corr = _correlation_matrix(window)
    if include_diagonal:
        constant = window.max(axis=0) == window.min(axis=0)
        np.fill_diagonal(corr, (~constant).astype(float))
        rows, cols = np.triu_indices(corr.shape[0], k=0)
    else:
        rows, cols = np.triu_indices(corr.shape[0], k=1)
    return PatternVector(
        coeffs=corr[rows, cols],
        label=label,
        include_diagonal=include_diagonal,
        run_id=run_id,
        start_t=snippet.start_t,
    )


def patterns_of_series(
    series: FeatureSeries, window_s: int, include_diagonal: bool = False
) -> list[PatternVector]:
    """Slice one run and turn every snippet into a labeled pattern vector."""
    return [
        pattern_of(s, label=series.app_label, include_diagonal=include_diagonal, run_id=series.run_id)
        for s in slice_series(series, window_s)
    ]


def write_pattern_csv(path: str, patterns: list[PatternVector], sidecar: dict | None = None) -> None:
    """Write patterns as CSV (label,run_id,start_t,c_0,...) plus a JSON sidecar."""
    if not patterns:
        raise ValueError("no patterns to write")
    width = len(patterns[0])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "run_id", "start_t"] + [f"c_{k}" for k in range(width)])
        for p in patterns:
            if len(p) != width:
                raise ValueError("mixed pattern lengths in one file")
            writer.writerow(
                [p.label, p.run_id, p.start_t] + [f"{v:.10g}" for v in p.coeffs]
            )
    meta = {
        "length": width,
        "include_diagonal": patterns[0].include_diagonal,
        "pair_order": "lexicographic (i, j), i < j" if not patterns[0].include_diagonal else "lexicographic (i, j), i <= j",
        "n_features": N_FEATURES,
    }
    if sidecar:
        meta.update(sidecar)
    with open(_sidecar_path(path), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_pattern_csv(path: str) -> tuple[list[PatternVector], dict]:
    sidecar_path = _sidecar_path(path)
    try:
        with open(sidecar_path) as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        meta = {}
    include_diagonal = bool(meta.get("include_diagonal", False))
    patterns = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            patterns.append(
                PatternVector(
                    coeffs=np.array([float(v) for v in row[3:]]),
                    label=row[0],
                    include_diagonal=include_diagonal,
                    run_id=int(row[1]),
                    start_t=int(row[2]),
                )
            )
    if not patterns:
        raise ValueError(f"no patterns in {path}")
    return patterns, meta


def _sidecar_path(csv_path: str) -> str:
    return csv_path[:-4] + ".json" if csv_path.endswith(".csv") else csv_path + ".json"
