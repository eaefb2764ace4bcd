"""Synchronous simulation of scalar consensus with weight learning.

One replica runs the closed loop for ``max_iter`` steps.  Step ``k`` reads
the state vector ``x(k)`` only: each normal node observes its current
in-neighbors through channel noise, updates its credibility ledger,
normalises it into a weight row and moves toward the weighted neighbor
states; faulty nodes follow their frozen rows or a random action.

All randomness is pre-drawn per step block from the replica's substreams
(see ``rng.ReplicaStreams``) and handed to the kernel, in this layout:

* topology: ``n*n`` uniforms per step (stochastic mode only)
* channel:  ``n*n`` noise values per step, entry [i, j] is w_ij
* process:  ``n`` noise values per step
* coin:     ``n`` uniforms per step, drawn for every node every step
* fault:    ``n`` uniforms per step, mapped onto each node's RandomSpec

Because every draw is addressed by (step, node[, neighbor]) the result
does not depend on the order nodes are processed in, nor on block size.
"""

from __future__ import annotations

import dataclasses
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import ConfigError, ConfigWarning
from .faults import NodeKind, NodeSpec, NoiseSpec, noise_from_uniform
from .rng import ReplicaStreams
from .topology import TopologyProvider, is_rooted_subgraph
from .wla import RewardSchedule, WeightRow, faulty_weight_row

# bytes of per-step random input allowed in one kernel call
_BLOCK_BYTES = 32 * 2**20


@dataclass(frozen=True)
class SimConfig:
    topology: TopologyProvider
    nodes: tuple[NodeSpec, ...]
    noise: NoiseSpec = NoiseSpec(10.0)
    reward: RewardSchedule = RewardSchedule()
    gamma: float = 0.8
    init_range: tuple[float, float] = (0.0, 1000.0)
    init_values: tuple[float, ...] | None = None
    max_iter: int = 1000
    seed: int = 0
    snapshot_steps: tuple[int, ...] = ()
    faulty_row_total: float = 0.8
    faulty_rows: dict[int, dict[int, float]] | None = None
    log_topology: bool = False

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "snapshot_steps", tuple(sorted(set(int(k) for k in self.snapshot_steps))))
        if self.init_values is not None:
            object.__setattr__(self, "init_values", tuple(float(v) for v in self.init_values))

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def stochastic(self) -> bool:
        return not self.topology.is_fixed

    @property
    def normal(self) -> list[int]:
        return [i for i, s in enumerate(self.nodes) if not s.is_faulty]

    @property
    def faulty(self) -> list[int]:
        return [i for i, s in enumerate(self.nodes) if s.is_faulty]

    def with_nodes(self, nodes: Sequence[NodeSpec]) -> "SimConfig":
        return dataclasses.replace(self, nodes=tuple(nodes))

    def validate(self) -> None:
        """Raise ``ConfigError`` on bad values; warn on structural concerns."""
        if self.topology.num_nodes != self.n:
            raise ConfigError("nodes", f"{self.n} node specs for a {self.topology.num_nodes}-node topology")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError("gamma", f"must lie in (0, 1), got {self.gamma}")
        if self.max_iter < 0:
            raise ConfigError("max_iter", "must be >= 0")
        lo, hi = self.init_range
        if not lo <= hi:
            raise ConfigError("init_state", f"need lo <= hi, got [{lo}, {hi}]")
        if self.init_values is not None and len(self.init_values) != self.n:
            raise ConfigError("init_state", f"expected {self.n} values, got {len(self.init_values)}")
        for k in self.snapshot_steps:
            if not 1 <= k <= self.max_iter:
                raise ConfigError("snapshot_steps", f"step {k} outside [1, {self.max_iter}]")
        if not 0.0 <= self.faulty_row_total < 1.0:
            raise ConfigError("faulty_rows.total", f"need 0 <= total < 1 (sum a_ij(0) < 1), got {self.faulty_row_total}")
        self.initial_faulty_matrix()  # validates explicit rows
        normal = self.normal
        if self.topology.is_fixed and normal:
            g = self.topology.graph
            if not is_rooted_subgraph(g, normal):
                warnings.warn("the normal-node subgraph is not rooted", ConfigWarning, stacklevel=2)
            lonely = [i for i in normal if len(g.in_neighbors[i]) == 1]
            if lonely:
                warnings.warn(
                    f"normal nodes {lonely} have a single in-neighbor; their weight scale "
                    "1 - 1/|N_i| is 0 so they never move toward neighbors",
                    ConfigWarning,
                    stacklevel=2,
                )
            isolated = [i for i in normal if not g.in_neighbors[i]]
            if isolated:
                raise ConfigError("topology", f"normal nodes {isolated} have no in-neighbors")

    def initial_faulty_matrix(self) -> np.ndarray:
        """Frozen rows a_ij(0) for faulty nodes (zero rows for normal nodes)."""
        n = self.n
        a0 = np.zeros((n, n))
        explicit = self.faulty_rows or {}
        for i in self.faulty:
            if i in explicit:
                row = WeightRow(i, {int(j): float(w) for j, w in explicit[i].items()})
                if i in row.weights:
                    raise ConfigError("faulty_rows", f"node {i}: self weight not allowed")
            elif self.topology.is_fixed:
                nbrs = sorted(self.topology.graph.in_neighbors[i])
                row = WeightRow(i, {j: self.faulty_row_total / len(nbrs) for j in nbrs} if nbrs else {})
            else:
                row = WeightRow(i, {j: self.faulty_row_total / (n - 1) for j in range(n) if j != i} if n > 1 else {})
            row = faulty_weight_row(row)
            for j, w in row.weights.items():
                if not 0 <= j < n:
                    raise ConfigError("faulty_rows", f"node {i}: neighbor {j} out of range")
                a0[i, j] = w
        return a0


@dataclass
class ConsensusState:
    """Mutable per-replica state: states, ledgers and weights of the last step."""

    k: int
    x: np.ndarray
    log_cred: np.ndarray
    last_log_reward: np.ndarray
    held: np.ndarray
    weights: np.ndarray


@dataclass
class SimTrace:
    states: np.ndarray
    disagreement: np.ndarray
    weight_snapshots: dict[int, np.ndarray]
    normal: tuple[int, ...]
    faulty: tuple[int, ...]
    topology_log: list[np.ndarray] | None = None
    backend: str = ""

    @property
    def max_iter(self) -> int:
        return len(self.disagreement) - 1

    def convergence_count(self, threshold: float) -> int:
        return convergence_count(self, threshold)


class _Arrays:
    """Config-derived arrays handed to the kernel."""

    def __init__(self, cfg: SimConfig):
        self.kind = np.array([int(s.kind) for s in cfg.nodes], dtype=np.int8)
        self.p_normal = np.array([s.p_normal for s in cfg.nodes], dtype=float)
        self.rand_lo = np.array([s.random.lo for s in cfg.nodes], dtype=float)
        self.rand_span = np.array([s.random.hi - s.random.lo for s in cfg.nodes], dtype=float)
        self.a0 = cfg.initial_faulty_matrix()


def initial_state(cfg: SimConfig, streams: ReplicaStreams) -> ConsensusState:
    n = cfg.n
    u = streams.init.random(n)
    if cfg.init_values is not None:
        x = np.array(cfg.init_values, dtype=float)
    else:
        lo, hi = cfg.init_range
        x = lo + (hi - lo) * u
    z = lambda: np.zeros((n, n))
    return ConsensusState(0, x, z(), z(), z(), z())


def _block_steps(cfg: SimConfig) -> int:
    per_step = cfg.n * cfg.n * 8 * (2 if cfg.stochastic else 1)
    return max(1, _BLOCK_BYTES // per_step)


@dataclass
class DrawBlock:
    """Random inputs for ``steps`` consecutive steps, addressed by position."""

    adj: np.ndarray    # (1 or steps, n, n) uint8; adj[t, i, j] means j in N_i
    chan: np.ndarray   # (steps, n, n) channel noise w_ij
    proc: np.ndarray   # (steps, n) process noise
    coin: np.ndarray   # (steps, n) uniforms for the IFN coin
    fault: np.ndarray  # (steps, n) random actions


def draw_block(cfg: SimConfig, streams: ReplicaStreams, steps: int, arrays: "_Arrays | None" = None) -> DrawBlock:
    """Consume the next ``steps`` steps of every substream."""
    arrays = arrays or _Arrays(cfg)
    n = cfg.n
    adj = cfg.topology.adjacency_block(streams.topology, steps)
    return DrawBlock(
        adj=np.ascontiguousarray(adj, dtype=np.uint8),
        chan=noise_from_uniform(cfg.noise.bound, streams.channel.random((steps, n, n))),
        proc=noise_from_uniform(cfg.noise.bound, streams.process.random((steps, n))),
        coin=streams.coin.random((steps, n)),
        fault=arrays.rand_lo + arrays.rand_span * streams.fault.random((steps, n)),
    )


def _advance(state, cfg, arrays, streams, steps, out, backend, topo_log):
    d = draw_block(cfg, streams, steps, arrays)
    if topo_log is not None and cfg.stochastic:
        topo_log.extend(np.argwhere(a.T) for a in d.adj)  # rows of (src, dst)
    backend.advance(
        state.x, state.log_cred, state.last_log_reward, state.held, state.weights,
        arrays.kind, arrays.p_normal, arrays.a0,
        d.adj, d.chan, d.proc, d.coin, d.fault,
        state.k, cfg.reward.theta0, cfg.reward.theta_slope, cfg.stochastic, cfg.gamma,
        out,
    )
    state.k += steps


def _resolve_backend(backend):
    if backend is None:
        return kernels.BACKEND, kernels.get_backend(kernels.BACKEND)
    return backend, kernels.get_backend(backend)


def step(state: ConsensusState, cfg: SimConfig, streams: ReplicaStreams, backend: str | None = None):
    """Advance one step in place; returns ``(x(k+1), state, weights used at k)``."""
    if state.k >= cfg.max_iter:
        raise ValueError(f"step {state.k} is past max_iter={cfg.max_iter}")
    _, be = _resolve_backend(backend)
    out = np.empty((1, cfg.n))
    _advance(state, cfg, _Arrays(cfg), streams, 1, out, be, None)
    return state.x.copy(), state, state.weights.copy()


def run(cfg: SimConfig, replica: int = 0, backend: str | None = None, validate: bool = True) -> SimTrace:
    """Run one replica for ``cfg.max_iter`` steps.

    ``weight_snapshots[k]`` is the weight matrix applied in the k-th
    iteration (the step from x(k-1) to x(k)).  Entries for pairs not in
    contact at that step keep the value from their most recent contact,
    so in fixed topologies this is simply a(k-1).
    """
    if validate:
        cfg.validate()
    name, be = _resolve_backend(backend)
    streams = ReplicaStreams(cfg.seed, replica)
    arrays = _Arrays(cfg)
    state = initial_state(cfg, streams)
    T = cfg.max_iter
    states = np.empty((T + 1, cfg.n))
    states[0] = state.x
    snaps: dict[int, np.ndarray] = {}
    topo_log: list | None = [] if cfg.log_topology else None
    stops = sorted(set(cfg.snapshot_steps) | {T})
    block = _block_steps(cfg)
    for stop in stops:
        while state.k < stop:
            steps = min(block, stop - state.k)
            k0 = state.k
            _advance(state, cfg, arrays, streams, steps, states[k0 + 1 : k0 + 1 + steps], be, topo_log)
        if stop in cfg.snapshot_steps:
            snaps[stop] = state.held.copy()
    normal = cfg.normal
    return SimTrace(
        states=states,
        disagreement=disagreement_series(states[:, normal]),
        weight_snapshots=snaps,
        normal=tuple(normal),
        faulty=tuple(cfg.faulty),
        topology_log=topo_log,
        backend=name,
    )


def first_crossing(cfg: SimConfig, threshold: float, replica: int = 0,
                   backend: str | None = None, block: int = 250) -> int:
    """Convergence count of one replica without keeping the trace.

    Stops drawing as soon as the threshold is crossed; the answer equals
    ``convergence_count(run(cfg, replica), threshold)``.
    """
    _, be = _resolve_backend(backend)
    streams = ReplicaStreams(cfg.seed, replica)
    arrays = _Arrays(cfg)
    state = initial_state(cfg, streams)
    normal = cfg.normal
    if disagreement(state.x, normal) < threshold:
        return 0
    block = min(block, _block_steps(cfg))
    while state.k < cfg.max_iter:
        steps = min(block, cfg.max_iter - state.k)
        k0 = state.k
        out = np.empty((steps, cfg.n))
        _advance(state, cfg, arrays, streams, steps, out, be, None)
        hit = np.flatnonzero(disagreement_series(out[:, normal]) < threshold)
        if hit.size:
            return k0 + 1 + int(hit[0])
    return cfg.max_iter


def disagreement(x: np.ndarray, normal: Iterable[int]) -> float:
    """RMS disagreement over ordered pairs of distinct normal nodes.

    ``sqrt(sum_{i != j} (x_i - x_j)^2 / (m (m - 1)))`` with m normal nodes,
    evaluated as ``sqrt(2 * sum (x_i - mean)^2 / (m - 1))``.  A single node
    agrees with itself, so m = 1 gives 0.
    """
    normal = list(normal)
    if not normal:
        raise ValueError("normal set is empty")
    return float(disagreement_series(np.asarray(x, dtype=float)[normal][None, :])[0])


def disagreement_series(xs: np.ndarray) -> np.ndarray:
    """Row-wise ``disagreement`` of a (steps, m) array of normal-node states."""
    m = xs.shape[1]
    if m < 2:
        return np.zeros(xs.shape[0])
    centered = xs - xs.mean(axis=1, keepdims=True)
    return np.sqrt(2.0 * (centered * centered).sum(axis=1) / (m - 1))


def convergence_count(trace: SimTrace | np.ndarray, threshold: float) -> int:
    """First k with V(x(k)) < threshold; the horizon if never reached."""
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    v = trace.disagreement if isinstance(trace, SimTrace) else np.asarray(trace)
    hit = np.flatnonzero(v < threshold)
    return int(hit[0]) if hit.size else len(v) - 1


def isolation_metric(weights: np.ndarray, normal: Iterable[int], faulty: Iterable[int]) -> float:
    """Largest weight any normal node gives a faulty node (0 if either set is empty)."""
    normal, faulty = list(normal), list(faulty)
    if set(normal) & set(faulty):
        raise ValueError("normal and faulty sets overlap")
    if not normal or not faulty:
        return 0.0
    return float(np.max(np.abs(np.asarray(weights)[np.ix_(normal, faulty)])))


def min_normal_weight(weights: np.ndarray, normal: Iterable[int], edges_only: np.ndarray | None = None) -> float:
    """Smallest normal-to-normal weight, off-diagonal; optionally only over edges."""
    normal = list(normal)
    sub = np.asarray(weights)[np.ix_(normal, normal)]
    mask = ~np.eye(len(normal), dtype=bool)
    if edges_only is not None:
        mask &= np.asarray(edges_only, dtype=bool)[np.ix_(normal, normal)]
    return float(sub[mask].min())


def _sweep_chunk(args):
    cfg, threshold, replicas, backend = args
    return [first_crossing(cfg, threshold, r, backend) for r in replicas]


@dataclass(frozen=True)
class SweepPoint:
    fault_prob: float
    mean_count: float
    rep_count: int
    counts: tuple[int, ...] = field(default=(), repr=False)


def sweep_fault_probability(
    base: SimConfig,
    ifn_nodes: Iterable[int],
    probs: Sequence[float],
    reps: int,
    threshold: float = 5.0,
    jobs: int = 1,
    backend: str | None = None,
) -> list[SweepPoint]:
    """Mean convergence count of ``reps`` replicas per IFN fault probability.

    Replica r uses the same substreams at every probability (common random
    numbers), so the curve is not blurred by unrelated seed noise.
    """
    ifn_nodes = sorted(set(ifn_nodes))
    if reps < 1:
        raise ValueError("reps must be >= 1")
    for q in probs:
        if not 0.0 <= q <= 1.0:
            raise ConfigError("sweep.probs", f"fault probability {q} outside [0, 1]")
    base.validate()
    tasks = []
    for q in probs:
        nodes = list(base.nodes)
        for i in ifn_nodes:
            nodes[i] = NodeSpec(NodeKind.IFN, 1.0 - q, base.nodes[i].random)
        cfg = base.with_nodes(nodes)
        n_chunks = max(1, jobs)
        for c in range(n_chunks):
            tasks.append((cfg, threshold, range(c, reps, n_chunks), backend))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_chunk, tasks))
    else:
        results = [_sweep_chunk(t) for t in tasks]

    points = []
    per_q = max(1, jobs)
    for qi, q in enumerate(probs):
        counts = [0] * reps
        for c in range(per_q):
            for r, cnt in zip(range(c, reps, per_q), results[qi * per_q + c]):
                counts[r] = cnt
        points.append(SweepPoint(float(q), float(np.mean(counts)), reps, tuple(counts)))
    return points
