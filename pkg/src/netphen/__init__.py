"""Traffic phenotyping toolkit: communication images, GLCM texture patterns,
k-NN recognition and accuracy-threshold anomaly detection over simulated
per-device throughput traces."""

from .detect import DetectionVerdict, detect, detection_report
from .imaging import CommunicationImage, QuantizationScale, fit_scale, quantize
from .learn import PhenotypeModel, SplitSpec, evaluate, fit_pca, load_model, recognize, save_model, train
from .patterns import FeatureSeries, PatternVector, Snippet, pattern_of, pearson, slice_series
from .sim import (
    AppProfile,
    DEFAULT_PROFILES,
    ThroughputTrace,
    Topology,
    build_grid_topology,
    inject_anomaly,
    simulate_run,
)
from .texture import Direction, Glcm, compute_glcm, feature_vector, features_of

__version__ = "0.1.0"

__all__ = [
    "AppProfile",
    "CommunicationImage",
    "DEFAULT_PROFILES",
    "DetectionVerdict",
    "Direction",
    "FeatureSeries",
    "Glcm",
    "PatternVector",
    "PhenotypeModel",
    "QuantizationScale",
    "Snippet",
    "SplitSpec",
    "ThroughputTrace",
    "Topology",
    "build_grid_topology",
    "compute_glcm",
    "detect",
    "detection_report",
    "evaluate",
    "feature_vector",
    "features_of",
    "fit_pca",
    "fit_scale",
    "inject_anomaly",
    "load_model",
    "pattern_of",
    "pearson",
    "quantize",
    "recognize",
    "save_model",
    "simulate_run",
    "slice_series",
    "train",
]
