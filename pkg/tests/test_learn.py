from collections import Counter

import numpy as np
import pytest

from netphen.imaging import QuantizationScale
from netphen.learn import (
    PhenotypeModel,
    SplitSpec,
    evaluate,
    fit_pca,
    load_model,
    recognize,
    recognize_batch,
    save_model,
    stratified_split,
    train,
)
from netphen.patterns import PatternVector

SCALE = QuantizationScale(max_throughput=100.0, levels=9)


def make_patterns(vectors, labels):
    return [PatternVector(coeffs=np.asarray(v, dtype=float), label=l) for v, l in zip(vectors, labels)]


def knn_oracle(db_vectors, db_labels, query, k):
    """Exhaustive-sort oracle with the documented tie rules."""
    dists = [float(((v - query) ** 2).sum()) for v in db_vectors]
    order = sorted(range(len(dists)), key=lambda i: (dists[i], i))[:k]
    votes = Counter(db_labels[i] for i in order)
    top = max(votes.values())
    tied = {label for label, n in votes.items() if n == top}
    if len(tied) == 1:
        return tied.pop()
    for i in order:
        if db_labels[i] in tied:
            return db_labels[i]
    raise AssertionError


def plane_data(n, dim, rng):
    """Points on an exact 2-D plane embedded in dim dimensions."""
    basis = np.zeros((2, dim))
    basis[0, 0] = 1.0
    basis[1, 1] = 1.0
    coords = rng.normal(size=(n, 2)) * [3.0, 1.0]
    return coords @ basis + rng.uniform(-1, 1, size=dim)


def test_pca_recovers_plane_rank():
    rng = np.random.default_rng(0)
    data = plane_data(200, 190, rng)
    mean, basis, ratios = fit_pca(data, retention=0.95)
    assert basis.shape == (190, 2)
    assert ratios.sum() == pytest.approx(1.0, abs=1e-9)


def test_pca_full_retention_keeps_rank():
    rng = np.random.default_rng(1)
    data = rng.normal(size=(40, 5)) @ np.hstack([np.eye(5), np.zeros((5, 7))])  # rank 5 in 12-D
    mean, basis, ratios = fit_pca(data, retention=1.0)
    assert basis.shape[1] == 5


def test_pca_reconstruction_error_matches_svd_oracle():
    rng = np.random.default_rng(2)
    data = rng.normal(size=(200, 190)) * rng.uniform(0.1, 3.0, size=190)
    mean, basis, ratios = fit_pca(data, retention=0.95)

    centered = data - data.mean(axis=0)
    # independent oracle: singular value decomposition of the centered data
    svals = np.linalg.svd(centered, compute_uv=False)
    variances = svals**2 / (data.shape[0] - 1)
    total = variances.sum()
    oracle_ratios = variances / total
    assert ratios == pytest.approx(oracle_ratios[: len(ratios)], abs=1e-9)

    reduced = centered @ basis
    reconstructed = reduced @ basis.T
    residual = ((centered - reconstructed) ** 2).sum() / (data.shape[0] - 1)
    expected = (1.0 - ratios.sum()) * total
    assert residual == pytest.approx(expected, abs=1e-6 * total)


def test_pca_sign_convention_deterministic():
    rng = np.random.default_rng(3)
    data = rng.normal(size=(60, 8))
    _, basis_a, _ = fit_pca(data, retention=1.0)
    _, basis_b, _ = fit_pca(data.copy(), retention=1.0)
    assert basis_a == pytest.approx(basis_b)
    for col in range(basis_a.shape[1]):
        peak = np.argmax(np.abs(basis_a[:, col]))
        assert basis_a[peak, col] > 0


def test_pca_rejects_identical_patterns():
    data = np.tile(np.arange(10.0), (8, 1))
    with pytest.raises(ValueError):
        fit_pca(data, retention=0.95)


def test_pca_isometry_at_full_retention():
    rng = np.random.default_rng(4)
    data = rng.normal(size=(30, 15))
    mean, basis, _ = fit_pca(data, retention=1.0)
    centered = data - mean
    reduced = centered @ basis
    for i in range(0, 30, 5):
        for j in range(1, 30, 7):
            d_full = np.linalg.norm(centered[i] - centered[j])
            d_red = np.linalg.norm(reduced[i] - reduced[j])
            assert d_red == pytest.approx(d_full, abs=1e-6)


def test_stratified_split_counts():
    rng = np.random.default_rng(5)
    patterns = make_patterns(rng.normal(size=(250, 10)), ["A"] * 100 + ["B"] * 100 + ["C"] * 50)
    train_set, test_set = stratified_split(patterns, SplitSpec(0.8, seed=1))
    train_counts = Counter(p.label for p in train_set)
    test_counts = Counter(p.label for p in test_set)
    for label, total in (("A", 100), ("B", 100), ("C", 50)):
        assert abs(train_counts[label] - 0.8 * total) <= 1
        assert train_counts[label] + test_counts[label] == total


def test_train_database_and_holdout_sizes():
    rng = np.random.default_rng(6)
    labels = [l for l in "ABCDE" for _ in range(100)]
    vectors = rng.normal(size=(500, 20)) + np.repeat(np.arange(5)[:, None] * 3.0, 100, axis=0)
    model = train(make_patterns(vectors, labels), SplitSpec(0.8, seed=2), SCALE, retention=0.95, k=5)
    assert model.database_vectors.shape[0] == 400
    assert len(model.database_labels) == 400
    assert set(model.baseline_accuracy) == set("ABCDE")
    # five well-separated blobs classify essentially perfectly
    assert min(model.baseline_accuracy.values()) > 0.9


def test_train_is_deterministic(tmp_path):
    rng = np.random.default_rng(7)
    labels = ["A"] * 40 + ["B"] * 40
    vectors = rng.normal(size=(80, 12)) + np.repeat([[0.0], [4.0]], 40, axis=0)
    patterns = make_patterns(vectors, labels)
    model_a = train(patterns, SplitSpec(0.8, seed=3), SCALE, k=3)
    model_b = train(patterns, SplitSpec(0.8, seed=3), SCALE, k=3)
    path_a, path_b = str(tmp_path / "a.json"), str(tmp_path / "b.json")
    save_model(model_a, path_a)
    save_model(model_b, path_b)
    assert open(path_a).read() == open(path_b).read()


def test_train_rejects_sparse_labels():
    rng = np.random.default_rng(8)
    labels = ["A"] * 50 + ["Rare"] * 3
    patterns = make_patterns(rng.normal(size=(53, 8)), labels)
    with pytest.raises(ValueError, match="Rare"):
        train(patterns, SplitSpec(0.8, seed=0), SCALE, k=5)


def test_recognize_zero_distance_and_degenerate_k():
    rng = np.random.default_rng(9)
    vectors = rng.normal(size=(30, 6))
    labels = ["A"] * 10 + ["B"] * 20
    mean, basis, ratios = fit_pca(vectors, retention=1.0)
    model = PhenotypeModel(
        scale=SCALE,
        mean=mean,
        basis=basis,
        explained_variance_ratio=ratios,
        database_vectors=(vectors - mean) @ basis,
        database_labels=labels,
        k=1,
        baseline_accuracy={"A": 1.0, "B": 1.0},
        config={},
    )
    probe = PatternVector(coeffs=vectors[4])
    assert recognize(model, probe) == "A"

    model.k = 30  # k = database size: global majority wins regardless of input
    assert recognize(model, PatternVector(coeffs=rng.normal(size=6))) == "B"


def test_recognize_matches_exhaustive_oracle():
    rng = np.random.default_rng(10)
    db = rng.normal(size=(50, 7))
    labels = [rng.choice(["A", "B", "C"]) for _ in range(50)]
    model = PhenotypeModel(
        scale=SCALE,
        mean=np.zeros(7),
        basis=np.eye(7),
        explained_variance_ratio=np.ones(7) / 7,
        database_vectors=db,
        database_labels=labels,
        k=5,
        baseline_accuracy={l: 1.0 for l in "ABC"},
        config={},
    )
    queries = rng.normal(size=(20, 7))
    batch = recognize_batch(model, [PatternVector(coeffs=q) for q in queries])
    for query, predicted in zip(queries, batch):
        assert predicted == knn_oracle(db, labels, query, 5)


def test_recognize_database_permutation_invariance():
    rng = np.random.default_rng(11)
    db = rng.normal(size=(40, 5))
    labels = [rng.choice(["A", "B"]) for _ in range(40)]
    base = dict(
        scale=SCALE,
        mean=np.zeros(5),
        basis=np.eye(5),
        explained_variance_ratio=np.ones(5) / 5,
        k=5,
        baseline_accuracy={"A": 1.0, "B": 1.0},
        config={},
    )
    model = PhenotypeModel(database_vectors=db, database_labels=labels, **base)
    perm = rng.permutation(40)
    shuffled = PhenotypeModel(
        database_vectors=db[perm], database_labels=[labels[i] for i in perm], **base
    )
    for _ in range(20):
        q = PatternVector(coeffs=rng.normal(size=5))
        assert recognize(model, q) == recognize(shuffled, q)


def test_recognize_dimension_mismatch():
    model = PhenotypeModel(
        scale=SCALE,
        mean=np.zeros(6),
        basis=np.eye(6),
        explained_variance_ratio=np.ones(6) / 6,
        database_vectors=np.zeros((3, 6)),
        database_labels=["A", "A", "A"],
        k=1,
        baseline_accuracy={"A": 1.0},
        config={},
    )
    with pytest.raises(ValueError):
        recognize(model, PatternVector(coeffs=np.zeros(5)))


def test_evaluate_memorization_and_disjoint_labels():
    rng = np.random.default_rng(12)
    labels = ["A"] * 20 + ["B"] * 20
    vectors = rng.normal(size=(40, 6)) + np.repeat([[0.0], [6.0]], 20, axis=0)
    patterns = make_patterns(vectors, labels)
    mean, basis, ratios = fit_pca(vectors, retention=1.0)
    model = PhenotypeModel(
        scale=SCALE,
        mean=mean,
        basis=basis,
        explained_variance_ratio=ratios,
        database_vectors=(vectors - mean) @ basis,
        database_labels=labels,
        k=1,
        baseline_accuracy={},
        config={},
    )
    accuracy, confusion = evaluate(model, patterns)
    assert accuracy == {"A": 1.0, "B": 1.0}
    assert confusion["A"]["A"] == 20

    strangers = make_patterns(rng.normal(size=(10, 6)) + 100.0, ["Z"] * 10)
    accuracy, confusion = evaluate(model, strangers)
    assert accuracy == {"Z": 0.0}
    assert "Z" not in confusion["Z"]


def test_model_roundtrip_and_config_refusal(tmp_path):
    rng = np.random.default_rng(13)
    labels = ["A"] * 30 + ["B"] * 30
    vectors = rng.normal(size=(60, 10)) + np.repeat([[0.0], [5.0]], 30, axis=0)
    model = train(
        make_patterns(vectors, labels),
        SplitSpec(0.8, seed=4),
        SCALE,
        k=3,
        config={"levels": 9, "window_s": 100, "include_diagonal": False},
    )
    path = str(tmp_path / "model.json")
    save_model(model, path)
    loaded = load_model(path, expect_config={"levels": 9, "window_s": 100})
    assert loaded.k == model.k
    assert loaded.baseline_accuracy == model.baseline_accuracy
    assert loaded.database_vectors == pytest.approx(model.database_vectors)
    assert loaded.scale == model.scale
    with pytest.raises(ValueError, match="config mismatch"):
        load_model(path, expect_config={"window_s": 50})


def test_split_spec_validation():
    with pytest.raises(ValueError):
        SplitSpec(train_fraction=1.0)
    with pytest.raises(ValueError):
        SplitSpec(train_fraction=0.0)
