"""Anomaly decision: recognition accuracy against per-application thresholds.

The system schedule says which application should be running, so a
monitored run is recognized snippet by snippet and its accuracy R' for the
expected label is compared with the threshold Th = R * theta, where R is
the model's held-out baseline accuracy for that label. R' falling strictly
below Th flags the traffic as anomalous.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .learn import PhenotypeModel, recognize_batch
from .patterns import PatternVector

DEFAULT_THETA = 0.95

#: Row order of the anomaly study report.
REPORT_INTENSITIES = (0.0, 0.1, 0.2, 0.3)


@dataclass
class DetectionVerdict:
    expected_label: str
    observed_accuracy: float
    threshold: float
    theta_th: float
    is_anomalous: bool
    snippet_count: int
    confusion: dict[str, int]
    anomaly_intensity: float | None = None  # ground truth when known (study harness)

    def to_dict(self) -> dict:
        doc = {
            "expected": self.expected_label,
            "observed_accuracy": self.observed_accuracy,
            "threshold": self.threshold,
            "theta_th": self.theta_th,
            "anomalous": self.is_anomalous,
            "snippet_count": self.snippet_count,
        }
        if self.anomaly_intensity is not None:
            doc["anomaly_intensity"] = self.anomaly_intensity
        return doc


def detect(
    model: PhenotypeModel,
    patterns: list[PatternVector],
    expected: str,
    theta_th: float = DEFAULT_THETA,
    anomaly_intensity: float | None = None,
) -> DetectionVerdict:
    """Verdict for one monitored batch of patterns against the expected label."""
    if expected not in model.baseline_accuracy:
        known = ", ".join(sorted(model.baseline_accuracy))
        raise ValueError(f"unknown expected label {expected!r}; model knows: {known}")
    if not patterns:
        raise ValueError("cannot judge an empty pattern list")
    if not 0.0 < theta_th <= 1.0:
        raise ValueError("theta_th must be in (0, 1]")
    predictions = recognize_batch(model, patterns)
    confusion: dict[str, int] = {}
    for label in predictions:
        confusion[label] = confusion.get(label, 0) + 1
    observed = confusion.get(expected, 0) / len(predictions)
    threshold = model.baseline_accuracy[expected] * theta_th
    return DetectionVerdict(
        expected_label=expected,
        observed_accuracy=observed,
        threshold=threshold,
        theta_th=theta_th,
        is_anomalous=observed < threshold,
        snippet_count=len(predictions),
        confusion=dict(sorted(confusion.items())),
        anomaly_intensity=anomaly_intensity,
    )


def detection_report(verdicts: list[DetectionVerdict], baseline: dict[str, float] | None = None) -> dict:
    """Aggregate verdicts into the anomaly-study table.

    Rows: Normal (clean-run mean R'), Thresholds, then one row per anomaly
    intensity with the mean observed accuracy; columns are the expected
    applications. Baseline held-out accuracies are reported alongside when
    given, since "Normal" here is a fresh clean evaluation.
    """
    apps = sorted({v.expected_label for v in verdicts})
    cells: dict[str, dict[str, list[float]]] = {}
    thresholds: dict[str, float] = {}
    for v in verdicts:
        intensity = v.anomaly_intensity if v.anomaly_intensity is not None else 0.0
        key = _intensity_key(intensity)
        cells.setdefault(key, {}).setdefault(v.expected_label, []).append(v.observed_accuracy)
        thresholds[v.expected_label] = v.threshold

    rows: list[dict] = []
    if baseline:
        rows.append({"row": "Baseline", "cells": {a: baseline.get(a) for a in apps}})
    order = [_intensity_key(i) for i in REPORT_INTENSITIES]
    extras = sorted(k for k in cells if k not in order)
    for key in order + extras:
        if key == "Normal":
            rows.append(
                {"row": "Normal", "cells": {a: _mean(cells.get(key, {}).get(a)) for a in apps}}
            )
            rows.append({"row": "Thresholds", "cells": {a: thresholds.get(a) for a in apps}})
        elif key in cells:
            rows.append({"row": key, "cells": {a: _mean(cells[key].get(a)) for a in apps}})
    flagged = sum(1 for v in verdicts if v.is_anomalous)
    return {
        "applications": apps,
        "rows": rows,
        "verdict_count": len(verdicts),
        "anomalous_count": flagged,
    }


def render_report(report: dict) -> str:
    """Aligned-text rendering of a detection report."""
    apps = report["applications"]
    if not apps:
        return "(no verdicts)\n"
    label_width = max(12, *(len(r["row"]) for r in report["rows"]))
    col_width = max(12, *(len(a) for a in apps))
    lines = [" " * label_width + "".join(f"{a:>{col_width + 2}}" for a in apps)]
    for row in report["rows"]:
        cells = []
        for app in apps:
            value = row["cells"].get(app)
            cells.append(f"{value:>{col_width + 2}.{4}f}" if value is not None else " " * (col_width + 2))
        lines.append(f"{row['row']:<{label_width}}" + "".join(cells))
    return "\n".join(lines) + "\n"


def write_report(report: dict, json_path: str | None = None, text_path: str | None = None) -> None:
    if json_path:
        with open(json_path, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if text_path:
        with open(text_path, "w") as fh:
            fh.write(render_report(report))


def _intensity_key(intensity: float) -> str:
    return "Normal" if intensity == 0 else f"{intensity * 100:g}% anomaly"


def _mean(values: list[float] | None) -> float | None:
    if not values:
        return None
    return float(np.mean(values))
