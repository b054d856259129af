from collections import deque

import numpy as np
import pytest

from netphen.sim import (
    BASE_LEVEL_KBPS,
    DEFAULT_PROFILES,
    build_grid_topology,
    default_profiles,
    inject_anomaly,
    load_trace,
    load_traces,
    save_trace,
    simulate_run,
    tree_wave_events,
)


def bfs_depths(adjacency, root):
    """Independent oracle: plain queue BFS depth per device."""
    depths = {root: 0}
    queue = deque([root])
    while queue:
        dev = queue.popleft()
        for other in adjacency[dev]:
            if other not in depths:
                depths[other] = depths[dev] + 1
                queue.append(other)
    return depths


def test_grid_topology_10x10():
    topo = build_grid_topology(10, 10, 0)
    assert topo.device_count == 100
    assert topo.root == 0
    depths = topo.depths()
    oracle = bfs_depths(topo.adjacency, 0)
    assert depths[99] == 18
    for dev in range(100):
        assert depths[dev] == oracle[dev]
    # adjacency symmetry, no self loops
    for dev, neigh in enumerate(topo.adjacency):
        assert dev not in neigh
        for other in neigh:
            assert dev in topo.adjacency[other]


def test_grid_topology_2x2():
    topo = build_grid_topology(2, 2, 0)
    assert topo.adjacency == ((1, 2), (0, 3), (0, 3), (1, 2))
    assert topo.parents == (-1, 0, 0, 1)


def test_grid_topology_1x1():
    topo = build_grid_topology(1, 1, 0)
    assert topo.adjacency == ((),)
    assert topo.parents == (-1,)


def test_grid_topology_spans_and_validates():
    topo = build_grid_topology(3, 7, root=20)
    assert sum(1 for p in topo.parents if p == -1) == 1
    assert topo.root == 20
    assert (topo.depths() >= 0).all()
    with pytest.raises(ValueError):
        build_grid_topology(3, 3, root=9)
    with pytest.raises(ValueError):
        build_grid_topology(0, 5)


@pytest.fixture(scope="module")
def grid():
    return build_grid_topology(10, 10, 0)


def test_simulate_deterministic(grid):
    profile = DEFAULT_PROFILES["Consensus"]
    a = simulate_run(profile, grid, seed=11, run_id=0)
    b = simulate_run(profile, grid, seed=11, run_id=0)
    assert (a.samples == b.samples).all()
    c = simulate_run(profile, grid, seed=12, run_id=0)
    assert not (a.samples == c.samples).all()


def test_simulate_shapes_and_nonnegativity(grid):
    for name, profile in DEFAULT_PROFILES.items():
        trace = simulate_run(profile, grid, seed=5)
        assert trace.samples.shape == (profile.duration_s, 100)
        assert (trace.samples >= 0).all()
        assert trace.app_label == name


def test_baseref_grand_mean_band(grid):
    trace = simulate_run(DEFAULT_PROFILES["BaseRef"], grid, seed=1)
    assert trace.samples.shape == (300, 100)
    assert 8.67 <= trace.samples.mean() <= 11.73


def test_grand_mean_within_15_percent_over_20_runs(grid):
    for name, profile in DEFAULT_PROFILES.items():
        target = profile.mean_throughput_kbps
        for seed in range(20):
            mean = simulate_run(profile, grid, seed=seed).samples.mean()
            assert abs(mean - target) <= 0.15 * target, (name, seed, mean)


def test_per_device_mean_within_15_percent(grid):
    for name, profile in DEFAULT_PROFILES.items():
        target = profile.mean_throughput_kbps
        trace = simulate_run(profile, grid, seed=77)
        device_means = trace.samples.mean(axis=0)
        rel = np.abs(device_means - target) / target
        assert rel.max() <= 0.15, (name, rel.max())


def test_consensus_density(grid):
    trace = simulate_run(DEFAULT_PROFILES["Consensus"], grid, seed=7)
    nonzero_fraction = (trace.samples > 0).mean(axis=0)
    assert (nonzero_fraction >= 0.90).all()


def test_aggregation_wave_conservation(grid):
    # in one up-tree wave every non-root device transmits exactly one payload,
    # regardless of how many children fed it
    t_rel, senders, receivers = tree_wave_events(grid, upward=True)
    send_counts = np.bincount(senders, minlength=100)
    root = grid.root
    assert send_counts[root] == 0
    assert (np.delete(send_counts, root) == 1).all()
    # the wave propagates toward the root: parents send after their children
    depths = grid.depths()
    for t, child in zip(t_rel, senders):
        assert t == depths.max() - depths[child]


def test_broadcast_wave_reaches_everyone(grid):
    t_rel, senders, receivers = tree_wave_events(grid, upward=False)
    assert set(receivers) == set(range(100)) - {grid.root}
    recv_counts = np.bincount(receivers, minlength=100)
    assert recv_counts[grid.root] == 0
    assert (np.delete(recv_counts, grid.root) == 1).all()


def test_inject_zero_intensity_identity(grid):
    trace = simulate_run(DEFAULT_PROFILES["Aggregation"], grid, seed=3)
    same = inject_anomaly(trace, 0.0, seed=99)
    assert (same.samples == trace.samples).all()
    assert same.anomaly_intensity == 0.0


def test_inject_mean_addition(grid):
    trace = simulate_run(DEFAULT_PROFILES["Aggregation"], grid, seed=4)
    noisy = inject_anomaly(trace, 0.30, seed=5)
    added = noisy.samples - trace.samples
    expected = 0.30 * 44.25
    assert abs(added.mean() - expected) <= 0.10 * expected
    assert noisy.anomaly_intensity == pytest.approx(0.30)
    assert noisy.app_label == trace.app_label
    assert noisy.duration_s == trace.duration_s


def test_inject_additive_nonnegative(grid):
    trace = simulate_run(DEFAULT_PROFILES["DGD"], grid, seed=6)
    noisy = inject_anomaly(trace, 0.10, seed=7)
    assert (noisy.samples >= trace.samples).all()


def test_inject_rejects_negative_intensity(grid):
    trace = simulate_run(DEFAULT_PROFILES["BaseRef"], grid, seed=8)
    with pytest.raises(ValueError):
        inject_anomaly(trace, -0.1, seed=0)


def test_profile_defaults_match_expected_tuples():
    expected = {
        "Aggregation": (195, 44.25),
        "Broadcast": (195, 23.77),
        "Consensus": (202, 499.04),
        "DGD": (242, 533.35),
        "BaseRef": (300, 10.20),
    }
    profiles = default_profiles()
    assert set(profiles) == set(expected)
    for name, (duration, mean) in expected.items():
        assert profiles[name].duration_s == duration
        assert profiles[name].mean_throughput_kbps == pytest.approx(mean)
    assert BASE_LEVEL_KBPS == pytest.approx(10.20)


def test_trace_roundtrip(tmp_path, grid):
    trace = simulate_run(DEFAULT_PROFILES["Broadcast"], grid, seed=21, run_id=7)
    csv_path, json_path = save_trace(trace, str(tmp_path))
    assert csv_path.endswith("broadcast_run0007.csv")
    loaded = load_trace(csv_path)
    assert loaded.app_label == "Broadcast"
    assert loaded.run_id == 7
    assert loaded.seed == 21
    assert loaded.rows == 10 and loaded.cols == 10
    assert loaded.samples.shape == trace.samples.shape
    assert loaded.samples == pytest.approx(trace.samples, abs=5e-4)

    header = open(csv_path).readline().strip().split(",")
    assert header[0] == "t"
    assert header[1] == "device_0"
    assert header[-1] == "device_99"

    both = load_traces(str(tmp_path))
    assert len(both) == 1


def test_trace_filename_carries_intensity(tmp_path, grid):
    trace = simulate_run(DEFAULT_PROFILES["DGD"], grid, seed=2, run_id=1)
    noisy = inject_anomaly(trace, 0.2, seed=3)
    csv_path, _ = save_trace(noisy, str(tmp_path))
    assert "a020" in csv_path
    assert load_trace(csv_path).anomaly_intensity == pytest.approx(0.2)
