"""Directional gray-level co-occurrence matrices and the five texture features.

A communication image yields four GLCMs, one per adjacency direction
(horizontal, vertical, positive diagonal, anti-diagonal), counted over
ordered pixel pairs with a single-step displacement. Each normalized GLCM
yields five scalar features:

    energy   = sqrt(sum M(i,j)^2)
    entropy  = sum M(i,j) * (-ln M(i,j)),  with 0*ln(0) = 0
    contrast = sum (i-j)^2 * M(i,j)
    idm      = sum M(i,j) / (1 + (i-j)^2)
    dm       = sum |i-j| * M(i,j)

so one image produces a 20-value feature vector, ordered direction-major:
(H, V, PD, AD) x (energy, entropy, contrast, idm, dm).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .imaging import CommunicationImage


class Direction(Enum):
    """Pixel-pair displacement: count(i,j) pairs value-at-p = i, value-at-(p+offset) = j."""

    HORIZONTAL = (0, 1)
    VERTICAL = (1, 0)
    POSITIVE_DIAGONAL = (1, 1)
    ANTI_DIAGONAL = (1, -1)

    @property
    def offset(self) -> tuple[int, int]:
        return self.value


DIRECTIONS = (
    Direction.HORIZONTAL,
    Direction.VERTICAL,
    Direction.POSITIVE_DIAGONAL,
    Direction.ANTI_DIAGONAL,
)

FEATURE_KINDS = ("energy", "entropy", "contrast", "idm", "dm")

#: Names of the 20 feature-vector entries in their fixed order.
FEATURE_NAMES = tuple(
    f"{direction.name.lower()}_{kind}" for direction in DIRECTIONS for kind in FEATURE_KINDS
)

N_FEATURES = len(FEATURE_NAMES)


class InvalidImageError(ValueError):
    """Raised when an image has no valid pixel pairs for a direction."""


@dataclass
class Glcm:
    counts: np.ndarray  # (L, L) nonnegative integer pair counts
    direction: Direction
    normalized: np.ndarray  # (L, L), sums to 1 when counts are nonzero


def _pair_views(pixels: np.ndarray, direction: Direction) -> tuple[np.ndarray, np.ndarray]:
    """Return aligned (first, second) pixel arrays for one displacement."""
    d_row, d_col = direction.offset
    if direction is Direction.ANTI_DIAGONAL:
        first = pixels[..., :-1, 1:]
        second = pixels[..., 1:, :-1]
    else:
        h_stop = pixels.shape[-2] - d_row or None
        w_stop = pixels.shape[-1] - d_col or None
        first = pixels[..., :h_stop, :w_stop]
        second = pixels[..., d_row:, d_col:]
    return first, second


def compute_glcm(image: CommunicationImage, direction: Direction) -> Glcm:
    """Count ordered adjacent pixel pairs of one image along one direction."""
    levels = image.levels
    first, second = _pair_views(image.pixels, direction)
    idx = first.astype(np.int64) * levels + second.astype(np.int64)
    counts = np.bincount(idx.ravel(), minlength=levels * levels).reshape(levels, levels)
    total = counts.sum()
    if total > 0:
        normalized = counts / total
    else:
        normalized = np.zeros_like(counts, dtype=float)
    return Glcm(counts=counts, direction=direction, normalized=normalized)


def features_of(glcm: Glcm) -> np.ndarray:
    """Five features (energy, entropy, contrast, idm, dm) of one normalized GLCM."""
    if glcm.counts.sum() == 0:
        raise InvalidImageError(
            f"image has no valid pixel pairs in direction {glcm.direction.name}"
        )
    m = glcm.normalized
    levels = m.shape[0]
    i, j = np.indices((levels, levels))
    diff = (i - j).astype(float)
    log_m = np.zeros_like(m)
    np.log(m, where=m > 0, out=log_m)
    energy = float(np.sqrt((m * m).sum()))
    entropy = float((-m * log_m).sum())
    contrast = float((diff**2 * m).sum())
    idm = float((m / (1.0 + diff**2)).sum())
    dm = float((np.abs(diff) * m).sum())
    return np.array([energy, entropy, contrast, idm, dm])


def feature_vector(image: CommunicationImage) -> np.ndarray:
    """All 20 texture features of one image, direction-major order."""
    return np.concatenate([features_of(compute_glcm(image, d)) for d in DIRECTIONS])


def feature_series(cube: np.ndarray, levels: int) -> np.ndarray:
    """Feature vectors for a (T, H, W) stack of images, vectorized over time.

    Equivalent to stacking feature_vector() over every image; kept separate
    because the per-second loop dominates pipeline cost otherwise.
    """
    cube = np.asarray(cube)
    n_t = cube.shape[0]
    if cube.shape[1] < 2 or cube.shape[2] < 2:
        # any direction with zero pairs invalidates the whole vector
        raise InvalidImageError("images too small for all four pair directions")
    i, j = np.indices((levels, levels))
    diff = (i - j).astype(float).ravel()
    inv_moment = 1.0 / (1.0 + diff**2)
    abs_diff = np.abs(diff)

    out = np.empty((n_t, N_FEATURES))
    t_offsets = np.arange(n_t) * levels * levels
    for d_idx, direction in enumerate(DIRECTIONS):
        first, second = _pair_views(cube, direction)
        idx = (first.astype(np.int64) * levels + second.astype(np.int64)).reshape(n_t, -1)
        flat = (idx + t_offsets[:, None]).ravel()
        counts = np.bincount(flat, minlength=n_t * levels * levels).reshape(n_t, -1)
        m = counts / counts.sum(axis=1, keepdims=True)
        log_m = np.zeros_like(m)
        np.log(m, where=m > 0, out=log_m)
        col = d_idx * 5
        out[:, col + 0] = np.sqrt((m * m).sum(axis=1))
        out[:, col + 1] = (-m * log_m).sum(axis=1)
        out[:, col + 2] = m @ (diff**2)
        out[:, col + 3] = m @ inv_moment
        out[:, col + 4] = m @ abs_diff
    return out


def write_feature_csv(path: str, values: np.ndarray) -> None:
    """Write one run's T x 20 feature series as CSV with header t,f_0,...,f_19."""
    values = np.asarray(values)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"f_{k}" for k in range(values.shape[1])])
        for t, row in enumerate(values):
            writer.writerow([t] + [f"{v:.10g}" for v in row])


def read_feature_csv(path: str) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row[1:]] for row in reader]
    if not rows:
        raise ValueError(f"no feature rows in {path}")
    if len(header) - 1 != len(rows[0]):
        raise ValueError(f"header/row width mismatch in {path}")
    return np.asarray(rows)
