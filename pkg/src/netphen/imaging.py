"""Communication images: quantizing one second of per-device throughput into gray levels.

One time sample of a throughput trace becomes an H x W image whose pixel
(x, y) is the quantized throughput of device W*x + y (row-major). Device
counts smaller than H*W are padded with zero pixels. Quantization uses a
single global scale fitted on a training corpus so that absolute magnitude
differences between traffic classes survive into the images.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np


@dataclass(frozen=True)
class QuantizationScale:
    """Global gray-level scale: values in [0, max_throughput] map to [0, levels-1]."""

    max_throughput: float
    levels: int

    def __post_init__(self) -> None:
        if self.max_throughput <= 0:
            raise ValueError("max_throughput must be positive")
        if self.levels < 2:
            raise ValueError("levels must be at least 2")


@dataclass
class CommunicationImage:
    pixels: np.ndarray  # (H, W) integer gray levels in [0, levels-1]
    levels: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape  # type: ignore[return-value]


def fit_scale(traces: Iterable, levels: int = 9, percentile: float = 99.5) -> QuantizationScale:
    """Fit the global quantization scale on a training corpus.

    The scale is the given percentile (default 99.5) of all samples pooled
    over the corpus, which keeps it robust to rare spikes; values above it
    clamp to the top gray level at quantization time.
    """
    pools = []
    for trace in traces:
        samples = np.asarray(getattr(trace, "samples", trace), dtype=float)
        pools.append(samples.ravel())
    if not pools:
        raise ValueError("cannot fit a scale on an empty corpus")
    pooled = np.concatenate(pools)
    if not np.any(pooled > 0):
        raise ValueError("cannot fit a scale on an all-zero corpus")
    cap = float(np.percentile(pooled, percentile))
    if cap <= 0:  # degenerate corpora where the percentile lands on zero
        cap = float(pooled.max())
    return QuantizationScale(max_throughput=cap, levels=levels)


def quantize_levels(values: np.ndarray, scale: QuantizationScale) -> np.ndarray:
    """Map throughput values (kbps) to integer gray levels, clamped to [0, L-1]."""
    top = scale.levels - 1
    raw = np.floor(np.asarray(values, dtype=float) / scale.max_throughput * top + 0.5)
    return np.clip(raw, 0, top).astype(np.int16)


def quantize(sample: np.ndarray, scale: QuantizationScale, rows: int, cols: int) -> CommunicationImage:
    """Quantize one time sample (length-D vector) into an H x W communication image.

    Devices fill the image row-major; surplus cells stay at gray level 0.
    """
    flat = np.asarray(sample, dtype=float).ravel()
    if flat.size > rows * cols:
        raise ValueError(f"{flat.size} devices do not fit a {rows}x{cols} image")
    pixels = np.zeros(rows * cols, dtype=np.int16)
    pixels[: flat.size] = quantize_levels(flat, scale)
    return CommunicationImage(pixels=pixels.reshape(rows, cols), levels=scale.levels)


def quantize_series(samples: np.ndarray, scale: QuantizationScale, rows: int, cols: int) -> np.ndarray:
    """Quantize a whole T x D trace into a (T, H, W) stack of gray-level images."""
    samples = np.asarray(samples, dtype=float)
    n_t, n_dev = samples.shape
    if n_dev > rows * cols:
        raise ValueError(f"{n_dev} devices do not fit a {rows}x{cols} image")
    cube = np.zeros((n_t, rows * cols), dtype=np.int16)
    cube[:, :n_dev] = quantize_levels(samples, scale)
    return cube.reshape(n_t, rows, cols)


def write_pgm(image: CommunicationImage, path: str) -> None:
    """Dump an image as plain PGM (P2) for eyeballing; maxval is levels-1."""
    h, w = image.pixels.shape
    lines = [f"P2\n{w} {h}\n{image.levels - 1}\n"]
    for row in image.pixels:
        lines.append(" ".join(str(int(v)) for v in row) + "\n")
    with open(path, "w") as fh:
        fh.writelines(lines)
