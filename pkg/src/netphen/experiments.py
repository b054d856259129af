"""Reproducible experiment harness: corpus building, window sweep, anomaly study.

Everything is derived from one master seed through named seed streams, so
re-running a harness function with the same configuration reproduces its
artifacts byte for byte.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .detect import DetectionVerdict, detect, detection_report, render_report
from .imaging import QuantizationScale, fit_scale, quantize_series
from .learn import PhenotypeModel, SplitSpec, train
from .patterns import FeatureSeries, PatternVector, patterns_of_series
from .sim import APP_NAMES, DEFAULT_PROFILES, ThroughputTrace, Topology, build_grid_topology, inject_anomaly, simulate_run
from .texture import feature_series

#: Applications monitored in the anomaly study (BaseRef's additive anomaly,
#: scaled by its 10 kbps mean, cannot cross a quantization level and is not
#: a monitored class).
TABLE4_APPS = ("Aggregation", "Broadcast", "Consensus", "DGD")

ANOMALY_INTENSITIES = (0.0, 0.1, 0.2, 0.3)

_APP_INDEX = {name: i for i, name in enumerate(APP_NAMES)}

# seed streams
_STREAM_TRAIN = 0
_STREAM_MONITOR = 1
_STREAM_INJECT = 2
_STREAM_SPLIT = 3


@dataclass
class RunConfig:
    levels: int = 9
    window_s: int = 100
    retention: float = 0.95
    k: int = 5
    theta_th: float = 0.95
    train_fraction: float = 0.8
    runs_per_app: int = 50
    monitor_runs: int = 40
    rows: int = 10
    cols: int = 10
    master_seed: int = 1234
    include_diagonal: bool = False

    def topology(self) -> Topology:
        return build_grid_topology(self.rows, self.cols, 0)

    def pipeline_config(self, window_s: int | None = None) -> dict:
        return {
            "levels": self.levels,
            "window_s": self.window_s if window_s is None else window_s,
            "include_diagonal": self.include_diagonal,
            "rows": self.rows,
            "cols": self.cols,
        }


def derive_seed(master: int, stream: int, app: str, index: int) -> int:
    """Deterministic per-run seed from (master seed, stream, app, run index)."""
    ss = np.random.SeedSequence((master, stream, _APP_INDEX[app], index))
    return int(ss.generate_state(1)[0])


def split_seed(master: int) -> int:
    return int(np.random.SeedSequence((master, _STREAM_SPLIT)).generate_state(1)[0])


def simulate_corpus(cfg: RunConfig) -> list[ThroughputTrace]:
    """The training corpus: runs_per_app clean runs of every stock class."""
    topo = cfg.topology()
    traces = []
    for app in APP_NAMES:
        profile = DEFAULT_PROFILES[app]
        for run_id in range(cfg.runs_per_app):
            seed = derive_seed(cfg.master_seed, _STREAM_TRAIN, app, run_id)
            traces.append(simulate_run(profile, topo, seed=seed, run_id=run_id))
    return traces


def features_for_trace(trace: ThroughputTrace, scale: QuantizationScale) -> FeatureSeries:
    cube = quantize_series(trace.samples, scale, trace.rows, trace.cols)
    return FeatureSeries(
        app_label=trace.app_label, run_id=trace.run_id, values=feature_series(cube, scale.levels)
    )


def patterns_for_trace(
    trace: ThroughputTrace, scale: QuantizationScale, window_s: int, include_diagonal: bool = False
) -> list[PatternVector]:
    return patterns_of_series(features_for_trace(trace, scale), window_s, include_diagonal)


def train_on_features(
    cfg: RunConfig,
    feature_sets: list[FeatureSeries],
    scale: QuantizationScale,
    window_s: int | None = None,
) -> PhenotypeModel:
    window = cfg.window_s if window_s is None else window_s
    corpus = []
    for feats in feature_sets:
        corpus.extend(patterns_of_series(feats, window, cfg.include_diagonal))
    split = SplitSpec(cfg.train_fraction, seed=split_seed(cfg.master_seed))
    return train(
        corpus,
        split,
        scale,
        retention=cfg.retention,
        k=cfg.k,
        config=cfg.pipeline_config(window),
    )


def run_fig8(
    cfg: RunConfig, windows: tuple[int, ...] = (50, 100, 150, 190), out_dir: str | None = None
) -> dict:
    """Held-out recognition accuracy per app for each sliding-window size."""
    traces = simulate_corpus(cfg)
    shortest = min(t.duration_s for t in traces)
    for window in windows:
        if window > shortest:
            raise ValueError(f"window {window}s exceeds the shortest run ({shortest}s)")
    scale = fit_scale(traces, cfg.levels)
    feature_sets = [features_for_trace(t, scale) for t in traces]
    accuracy: dict[int, dict[str, float]] = {}
    for window in windows:
        model = train_on_features(cfg, feature_sets, scale, window_s=window)
        accuracy[window] = dict(model.baseline_accuracy)
    result = {
        "windows": list(windows),
        "apps": list(APP_NAMES),
        "accuracy": {str(w): accuracy[w] for w in windows},
        "config": cfg.pipeline_config(),
        "master_seed": cfg.master_seed,
        "runs_per_app": cfg.runs_per_app,
        "scale_max_throughput": scale.max_throughput,
    }
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, "fig8_accuracy.csv")
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["window"] + list(APP_NAMES))
            for window in windows:
                writer.writerow(
                    [window] + [f"{accuracy[window][app]:.6f}" for app in APP_NAMES]
                )
        with open(os.path.join(out_dir, "fig8_accuracy.json"), "w") as fh:
            json.dump(result, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return result


def monitored_verdicts(
    cfg: RunConfig,
    model: PhenotypeModel,
    apps: tuple[str, ...] = TABLE4_APPS,
    intensities: tuple[float, ...] = ANOMALY_INTENSITIES,
) -> list[DetectionVerdict]:
    """Fresh monitored runs per (app, intensity) judged against the model."""
    topo = cfg.topology()
    window = int(model.config["window_s"])
    verdicts = []
    for app in apps:
        profile = DEFAULT_PROFILES[app]
        for level_idx, intensity in enumerate(intensities):
            for i in range(cfg.monitor_runs):
                run_index = 1_000_000 * (level_idx + 1) + i
                seed = derive_seed(cfg.master_seed, _STREAM_MONITOR, app, run_index)
                trace = simulate_run(profile, topo, seed=seed, run_id=run_index)
                if intensity > 0:
                    inject_seed = derive_seed(cfg.master_seed, _STREAM_INJECT, app, run_index)
                    trace = inject_anomaly(trace, intensity, seed=inject_seed)
                patterns = patterns_for_trace(trace, model.scale, window, cfg.include_diagonal)
                verdicts.append(
                    detect(
                        model,
                        patterns,
                        expected=app,
                        theta_th=cfg.theta_th,
                        anomaly_intensity=intensity,
                    )
                )
    return verdicts


def run_table4(cfg: RunConfig, out_dir: str | None = None) -> dict:
    """Threshold vs anomaly-accuracy study at the configured window size."""
    traces = simulate_corpus(cfg)
    scale = fit_scale(traces, cfg.levels)
    feature_sets = [features_for_trace(t, scale) for t in traces]
    model = train_on_features(cfg, feature_sets, scale)
    verdicts = monitored_verdicts(cfg, model)
    report = detection_report(verdicts, baseline=model.baseline_accuracy)

    clean = [v for v in verdicts if not v.anomaly_intensity]
    false_positives = sum(1 for v in clean if v.is_anomalous)
    anomalous = [v for v in verdicts if v.anomaly_intensity]
    missed = sum(1 for v in anomalous if not v.is_anomalous)
    report.update(
        {
            "theta_th": cfg.theta_th,
            "window_s": cfg.window_s,
            "monitor_runs": cfg.monitor_runs,
            "master_seed": cfg.master_seed,
            "clean_verdicts": len(clean),
            "clean_false_positives": false_positives,
            "clean_false_positive_rate": false_positives / len(clean) if clean else 0.0,
            "anomalous_verdicts": len(anomalous),
            "anomalous_missed": missed,
            "scale_max_throughput": scale.max_throughput,
            "config": cfg.pipeline_config(),
        }
    )
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "table4.json"), "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(os.path.join(out_dir, "table4.txt"), "w") as fh:
            fh.write(render_report(report))
    return report
