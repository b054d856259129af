"""Synthetic per-second throughput traces for five traffic classes on a device grid.

Each run is a T x D matrix (kbps) of per-device throughput, one row per
second. A run has an idle lead-in/lead-out at base-reference level and an
active window in the middle where the application's schedule plays out:

  Aggregation  pipelined up-tree waves: the deepest devices send first and
               payloads of one fixed size hop toward the root second by
               second, so non-leaf devices forward the same volume
               regardless of how many children fed them.
  Broadcast    down-tree waves from the root, each parent serving its
               children on consecutive seconds.
  Consensus    every device exchanges with all neighbors every second
               inside its own jittered start/stop window, with a smooth
               convergence decay.
  DGD          the same neighbor exchange but on globally synchronized
               iteration boundaries (exchange second / compute second),
               with a stepped intensity schedule.
  BaseRef      background chatter only.

Every scheduled transmission size is multiplied by a uniform jitter factor
and contributes to both endpoints' throughput. On top of the schedule each
device carries a slowly modulated chatter pedestal and (for the low-rate
apps) sparse keepalive bursts. Payloads are calibrated per device from the
profile's target mean, so per-run means track the profile closely.

All randomness comes from one numpy Generator seeded per run: identical
(profile, topology, seed) inputs reproduce traces bit for bit.
"""

from __future__ import annotations

import csv
import json
import os
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

#: Idle-network throughput level (kbps) used for lead-in/out and BaseRef.
BASE_LEVEL_KBPS = 10.20


@dataclass(frozen=True)
class Topology:
    """4-connected grid with a BFS spanning tree (parent of the root is -1)."""

    rows: int
    cols: int
    adjacency: tuple[tuple[int, ...], ...]
    parents: tuple[int, ...]

    @property
    def device_count(self) -> int:
        return self.rows * self.cols

    @property
    def root(self) -> int:
        return self.parents.index(-1)

    def depths(self) -> np.ndarray:
        """Tree depth per device (root = 0)."""
        parents = np.asarray(self.parents)
        depths = np.full(len(parents), -1, dtype=int)
        depths[self.root] = 0
        pending = True
        while pending:
            pending = False
            for dev, par in enumerate(parents):
                if depths[dev] < 0 and par >= 0 and depths[par] >= 0:
                    depths[dev] = depths[par] + 1
                    pending = True
        return depths

    def children(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.device_count)]
        for dev, par in enumerate(self.parents):
            if par >= 0:
                out[par].append(dev)
        return out

    def edges(self) -> list[tuple[int, int]]:
        """Undirected adjacency edges as (low, high) pairs."""
        seen = []
        for dev, neigh in enumerate(self.adjacency):
            for other in neigh:
                if dev < other:
                    seen.append((dev, other))
        return seen


def build_grid_topology(rows: int, cols: int, root: int = 0) -> Topology:
    """4-connected rows x cols grid with a BFS tree from the root device.

    Neighbor lists are sorted and BFS visits lowest indices first, so the
    tree is deterministic.
    """
    if rows < 1 or cols < 1:
        raise ValueError("grid must have at least one row and one column")
    count = rows * cols
    if not 0 <= root < count:
        raise ValueError(f"root {root} out of range for {count} devices")
    adjacency: list[tuple[int, ...]] = []
    for dev in range(count):
        r, c = divmod(dev, cols)
        neigh = []
        if r > 0:
            neigh.append(dev - cols)
        if r < rows - 1:
            neigh.append(dev + cols)
        if c > 0:
            neigh.append(dev - 1)
        if c < cols - 1:
            neigh.append(dev + 1)
        adjacency.append(tuple(sorted(neigh)))
    parents = [-2] * count
    parents[root] = -1
    queue = deque([root])
    while queue:
        dev = queue.popleft()
        for other in adjacency[dev]:
            if parents[other] == -2:
                parents[other] = dev
                queue.append(other)
    if min(parents) < -1:
        raise AssertionError("grid BFS failed to span all devices")
    return Topology(rows=rows, cols=cols, adjacency=tuple(adjacency), parents=tuple(parents))


@dataclass
class AppProfile:
    """One traffic class: duration, per-device mean target and schedule knobs."""

    name: str
    duration_s: int
    mean_throughput_kbps: float
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        if self.mean_throughput_kbps <= 0:
            raise ValueError("mean_throughput_kbps must be positive")

    def param(self, key: str, default):
        return self.params.get(key, default)


def default_profiles() -> dict[str, AppProfile]:
    """The five stock traffic classes with calibrated schedule parameters."""
    return {
        "Aggregation": AppProfile(
            "Aggregation",
            195,
            44.25,
            params={
                "lead_s": 25,
                "chatter_share": 0.35,
                "burst_share": 0.35,
                "burst_kbps": 64.0,
                "wave_gap_s": 24,
                "wave_step_s": 1,
                "jitter": 0.2,
            },
        ),
        "Broadcast": AppProfile(
            "Broadcast",
            195,
            23.77,
            params={
                "lead_s": 25,
                "chatter_share": 0.30,
                "burst_share": 0.35,
                "burst_kbps": 64.0,
                "wave_gap_s": 24,
                "wave_step_s": 2,
                "jitter": 0.2,
            },
        ),
        "Consensus": AppProfile(
            "Consensus",
            202,
            499.04,
            params={
                "lead_s": 25,
                "chatter_share": 0.30,
                "burst_share": 0.0,
                "start_jitter_s": 10.0,
                "env_floor": 0.75,
                "env_rate": 1.0,
                "duty": 0.85,
                "jitter": 0.2,
            },
        ),
        "DGD": AppProfile(
            "DGD",
            242,
            533.35,
            params={
                "lead_s": 25,
                "chatter_share": 0.30,
                "burst_share": 0.0,
                "phase_weights": (1.0, 0.7, 0.45),
                "stairs": (1.0, 0.9, 0.8),
                "jitter": 0.2,
            },
        ),
        "BaseRef": AppProfile(
            "BaseRef",
            300,
            BASE_LEVEL_KBPS,
            params={
                "lead_s": 0,
                "chatter_share": 0.75,
                "burst_share": 0.15,
                "burst_kbps": 160.0,
                "burst2_share": 0.10,
                "burst2_kbps": 430.0,
            },
        ),
    }


DEFAULT_PROFILES = default_profiles()

APP_NAMES = tuple(DEFAULT_PROFILES)

#: Chatter pedestal texture knobs shared by all schedules.
_CHATTER_MOD_DEPTH = 0.12
_CHATTER_MOD_PERIODS = (40, 50, 60, 70, 80)
_CHATTER_JITTER = 0.05
_BURST_JITTER = 0.05

#: Idle-background speckle bursts (lead-in/out; matches the BaseRef texture):
#: (share of the base level, burst size kbps) per population.
_BASE_BURSTS = ((0.15, 160.0), (0.10, 430.0))


@dataclass
class ThroughputTrace:
    app_label: str
    run_id: int
    samples: np.ndarray  # (T, D) kbps
    seed: int
    rows: int
    cols: int
    anomaly_intensity: float = 0.0

    @property
    def duration_s(self) -> int:
        return self.samples.shape[0]

    @property
    def device_count(self) -> int:
        return self.samples.shape[1]


def simulate_run(profile: AppProfile, topo: Topology, seed: int, run_id: int = 0) -> ThroughputTrace:
    """Generate one run of the given traffic class on the given topology."""
    rng = np.random.default_rng(seed)
    n_t = profile.duration_s
    n_dev = topo.device_count
    lead = int(profile.param("lead_s", 25))
    w0, w1 = lead, n_t - lead
    if w1 - w0 < 1:
        raise ValueError("lead-in/out leaves no active window")
    window = w1 - w0

    # per-second in-window budget so that the whole-run mean hits the target
    m_w = (profile.mean_throughput_kbps * n_t - BASE_LEVEL_KBPS * (n_t - window)) / window
    if m_w <= 0:
        raise ValueError("profile mean is below the idle base level")
    c_share = float(profile.param("chatter_share", 0.3))
    b_share = float(profile.param("burst_share", 0.0))
    s_share = 1.0 - c_share - b_share
    if s_share < -1e-9:
        raise ValueError("chatter_share + burst_share exceed the budget")
    s_share = max(s_share, 0.0)

    samples = np.zeros((n_t, n_dev))

    # idle lead-in/out at base-reference level, speckle bursts included so
    # idle-period textures are not perfectly flat
    if lead > 0:
        burst_total = sum(share for share, _ in _BASE_BURSTS)
        for a, b in ((0, w0), (w1, n_t)):
            _add_chatter(rng, samples, a, b, np.full(n_dev, (1 - burst_total) * BASE_LEVEL_KBPS))
            for share, size in _BASE_BURSTS:
                _add_bursts(rng, samples, a, b, share * BASE_LEVEL_KBPS, size)

    # app structure inside the window; unit_mean is the exact expected
    # per-device mean of the unit-payload schedule, used for calibration
    structured = np.zeros((window, n_dev))
    unit_mean = np.zeros(n_dev)
    name = profile.name
    if s_share > 0 and name in ("Aggregation", "Broadcast"):
        unit_mean = _add_tree_waves(rng, structured, profile, topo, upward=name == "Aggregation")
    elif s_share > 0 and name in ("Consensus", "DGD"):
        unit_mean = _add_exchange(rng, structured, profile, topo, synchronized=name == "DGD")
    elif name not in APP_NAMES:
        raise ValueError(f"unknown traffic class {name!r}")

    budget = s_share * m_w
    peak = unit_mean.max() if unit_mean.size else 0.0
    if peak > 0 and budget > 0:
        payload = budget / peak
        samples[w0:w1] += payload * structured
        makeup = budget - payload * unit_mean
    else:
        makeup = np.full(n_dev, budget)

    # sparse keepalive bursts (sentinels for the low-rate classes)
    burst_mean = 0.0
    if b_share > 0:
        burst_mean = _add_bursts(
            rng, samples, w0, w1, b_share * m_w, float(profile.param("burst_kbps", 50.0))
        )

    # chatter pedestal absorbs per-device makeup and burst rounding residue
    _add_chatter(rng, samples, w0, w1, c_share * m_w + makeup + (b_share * m_w - burst_mean))

    return ThroughputTrace(
        app_label=profile.name,
        run_id=run_id,
        samples=samples,
        seed=seed,
        rows=topo.rows,
        cols=topo.cols,
    )


def inject_anomaly(
    trace: ThroughputTrace, intensity: float, seed: int, mean_kbps: float | None = None
) -> ThroughputTrace:
    """Additive anomaly traffic: each cell gains uniform [0, 2*intensity*mean] kbps.

    The mean defaults to the labeled application's profile mean, so the
    expected per-cell addition is intensity * mean. Zero intensity returns
    an identical copy.
    """
    if intensity < 0:
        raise ValueError("intensity must be nonnegative")
    if mean_kbps is None:
        profile = DEFAULT_PROFILES.get(trace.app_label)
        if profile is None:
            raise ValueError(f"no default profile for label {trace.app_label!r}; pass mean_kbps")
        mean_kbps = profile.mean_throughput_kbps
    if intensity == 0:
        return replace(trace, samples=trace.samples.copy(), anomaly_intensity=0.0)
    rng = np.random.default_rng(seed)
    noise = rng.uniform(0.0, 2.0 * intensity * mean_kbps, size=trace.samples.shape)
    return replace(trace, samples=trace.samples + noise, anomaly_intensity=intensity)


# ---------------------------------------------------------------------------
# schedule components


def _add_chatter(
    rng: np.random.Generator, samples: np.ndarray, t0: int, t1: int, level: np.ndarray
) -> None:
    """Per-device pedestal with slow sinusoidal modulation and per-cell jitter.

    The modulation is centered per device over [t0, t1) so expected means
    equal the requested levels exactly.
    """
    span = t1 - t0
    if span <= 0:
        return
    n_dev = samples.shape[1]
    periods = rng.choice(_CHATTER_MOD_PERIODS, size=n_dev)
    phases = rng.uniform(0.0, 1.0, size=n_dev)
    t = np.arange(span)[:, None]
    wave = np.sin(2.0 * np.pi * (t / periods[None, :] + phases[None, :]))
    wave -= wave.mean(axis=0, keepdims=True)
    factor = 1.0 + _CHATTER_MOD_DEPTH * wave
    jitter = rng.uniform(1.0 - _CHATTER_JITTER, 1.0 + _CHATTER_JITTER, size=(span, n_dev))
    samples[t0:t1] += np.asarray(level)[None, :] * factor * jitter


def _add_bursts(
    rng: np.random.Generator,
    samples: np.ndarray,
    t0: int,
    t1: int,
    mean_budget: float,
    burst_kbps: float,
) -> float:
    """Sparse keepalive bursts of a fixed size at random seconds.

    Every device gets the same burst count (randomly placed), so per-device
    means stay flat; returns the expected mean actually emitted so the
    caller can fold the rounding residual into the pedestal.
    """
    span = t1 - t0
    if span <= 0 or mean_budget <= 0 or burst_kbps <= 0:
        return 0.0
    n_dev = samples.shape[1]
    count = int(np.clip(round(mean_budget * span / burst_kbps), 1, span))
    order = np.argsort(rng.random((n_dev, span)), axis=1)
    mask = np.zeros((n_dev, span), dtype=bool)
    np.put_along_axis(mask, order[:, :count], True, axis=1)
    sizes = burst_kbps * rng.uniform(1.0 - _BURST_JITTER, 1.0 + _BURST_JITTER, size=(n_dev, span))
    samples[t0:t1] += (mask * sizes).T
    return count * burst_kbps / span


def tree_wave_events(
    topo: Topology, upward: bool, step_s: int = 1
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(t_rel, sender, receiver) for one wave launched at relative second 0.

    Upward waves: every non-root device sends one payload to its parent at
    second step_s * (max_depth - depth). Downward waves: each parent serves
    its children on consecutive seconds starting at step_s * depth; step_s
    sets how long the wavefront dwells per tree level.
    """
    depths = topo.depths()
    children = topo.children()
    t_rel, senders, receivers = [], [], []
    if upward:
        max_depth = int(depths.max())
        for dev, par in enumerate(topo.parents):
            if par < 0:
                continue
            t_rel.append(step_s * (max_depth - int(depths[dev])))
            senders.append(dev)
            receivers.append(par)
    else:
        for par, kids in enumerate(children):
            for slot, kid in enumerate(sorted(kids)):
                t_rel.append(step_s * int(depths[par]) + slot)
                senders.append(par)
                receivers.append(kid)
    return np.asarray(t_rel), np.asarray(senders), np.asarray(receivers)


def _add_tree_waves(
    rng: np.random.Generator,
    structured: np.ndarray,
    profile: AppProfile,
    topo: Topology,
    upward: bool,
) -> np.ndarray:
    """Accumulate unit-payload pipelined waves; returns exact per-device unit means."""
    window, n_dev = structured.shape
    step = max(int(profile.param("wave_step_s", 1)), 1)
    t_rel, senders, receivers = tree_wave_events(topo, upward, step_s=step)
    if t_rel.size == 0:
        return np.zeros(n_dev)
    span = int(t_rel.max()) + 1
    if span > window:
        return np.zeros(n_dev)
    gap = max(int(profile.param("wave_gap_s", 24)), 1)
    launches = np.arange(0, window - span + 1, gap)
    jitter = float(profile.param("jitter", 0.2))
    unit_count = np.zeros(n_dev)
    for t0 in launches:
        t = t0 + t_rel
        u = rng.uniform(1.0 - jitter, 1.0 + jitter, size=t_rel.size)
        np.add.at(structured, (t, senders), u)
        np.add.at(structured, (t, receivers), u)
        np.add.at(unit_count, senders, 1.0)
        np.add.at(unit_count, receivers, 1.0)
    return unit_count / window


def _add_exchange(
    rng: np.random.Generator,
    structured: np.ndarray,
    profile: AppProfile,
    topo: Topology,
    synchronized: bool,
) -> np.ndarray:
    """Neighbor exchange with degree-balanced link rates; returns unit means.

    Every active second each device sends to all neighbors; a transmission
    contributes its jittered size to both endpoints. Consensus runs every
    second within per-device start/stop offsets under a smooth decay; DGD
    alternates exchange/compute seconds in lockstep under a stepped decay.
    """
    window, n_dev = structured.shape
    edges = topo.edges()
    if not edges:
        return np.zeros(n_dev)
    degree = np.array([len(n) for n in topo.adjacency], dtype=float)
    # directed links, both orientations; rate balances endpoint degrees
    src = np.array([e[0] for e in edges] + [e[1] for e in edges])
    dst = np.array([e[1] for e in edges] + [e[0] for e in edges])
    rate = 2.0 / (degree[src] + degree[dst])

    t = np.arange(window, dtype=float)
    if synchronized:
        period = max(int(profile.param("iteration_period_s", 2)), 1)
        stairs = tuple(profile.param("stairs", (1.0, 0.78, 0.60)))
        n_iter = max(int(np.ceil(window / period)), 1)
        iteration = (np.arange(window) // period).astype(int)
        epoch = np.minimum(len(stairs) * iteration // n_iter, len(stairs) - 1)
        weight = np.asarray(stairs)[epoch]
        compute_w = float(profile.param("compute_weight", 0.3))
        exchange_second = (np.arange(window) % period) == 0
        weight = weight * np.where(exchange_second, 1.0, compute_w)
        active = np.ones((window, n_dev), dtype=bool)
    else:
        floor = float(profile.param("env_floor", 0.3))
        env_rate = float(profile.param("env_rate", 3.0))
        weight = floor + (1.0 - floor) * np.exp(-env_rate * t / window)
        start_jitter = float(profile.param("start_jitter_s", 10.0))
        starts = rng.uniform(0.0, start_jitter, size=n_dev)
        stops = window - rng.uniform(0.0, start_jitter, size=n_dev)
        tt = np.arange(window)[:, None]
        active = (tt >= starts[None, :]) & (tt < stops[None, :])
        # asynchronous gossip: every device also follows its own slow
        # talk/listen duty cycle, so the set of chattering devices churns
        duty = float(profile.param("duty", 1.0))
        if duty < 1.0:
            periods = rng.uniform(10.0, 24.0, size=n_dev)
            phases = rng.uniform(0.0, 1.0, size=n_dev)
            churn = ((tt / periods[None, :] + phases[None, :]) % 1.0) < duty
            active &= churn

    jitter = float(profile.param("jitter", 0.2))
    u = rng.uniform(1.0 - jitter, 1.0 + jitter, size=(window, src.size))
    contrib = (weight[:, None] * active[:, src]) * rate[None, :] * u
    acc = structured.T  # (D, W) view for per-device accumulation
    np.add.at(acc, src, contrib.T)
    np.add.at(acc, dst, contrib.T)

    # exact expected unit means: sender activity sums per directed link
    sent = active.astype(float).T @ weight  # (D,) sum_t weight_t * active_d
    unit_mean = np.zeros(n_dev)
    np.add.at(unit_mean, src, rate * sent[src])
    np.add.at(unit_mean, dst, rate * sent[src])
    return unit_mean / window


# ---------------------------------------------------------------------------
# trace files


def trace_basename(trace: ThroughputTrace) -> str:
    stem = f"{trace.app_label.lower()}_run{trace.run_id:04d}"
    if trace.anomaly_intensity > 0:
        stem += f"_a{round(trace.anomaly_intensity * 100):03d}"
    return stem


def save_trace(trace: ThroughputTrace, directory: str) -> tuple[str, str]:
    """Write a run as CSV (t,device_0,...) plus a JSON sidecar; returns the paths."""
    os.makedirs(directory, exist_ok=True)
    stem = os.path.join(directory, trace_basename(trace))
    csv_path, json_path = stem + ".csv", stem + ".json"
    n_dev = trace.device_count
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"device_{d}" for d in range(n_dev)])
        for t, row in enumerate(trace.samples):
            writer.writerow([t] + [f"{v:.3f}" for v in row])
    meta = {
        "app_label": trace.app_label,
        "run_id": trace.run_id,
        "seed": trace.seed,
        "anomaly_intensity": trace.anomaly_intensity,
        "rows": trace.rows,
        "cols": trace.cols,
    }
    with open(json_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, json_path


def load_trace(csv_path: str) -> ThroughputTrace:
    json_path = csv_path[:-4] + ".json"
    with open(json_path) as fh:
        meta = json.load(fh)
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    samples = data[:, 1:]
    return ThroughputTrace(
        app_label=meta["app_label"],
        run_id=int(meta["run_id"]),
        samples=samples,
        seed=int(meta["seed"]),
        rows=int(meta["rows"]),
        cols=int(meta["cols"]),
        anomaly_intensity=float(meta.get("anomaly_intensity", 0.0)),
    )


def load_traces(directory: str) -> list[ThroughputTrace]:
    paths = sorted(
        os.path.join(directory, name) for name in os.listdir(directory) if name.endswith(".csv")
    )
    if not paths:
        raise ValueError(f"no trace CSV files in {directory}")
    return [load_trace(p) for p in paths]
