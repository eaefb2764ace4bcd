"""Fault-tolerant logical clock synchronization on top of weight learning.

Each node owns a hardware clock ``tau*(t) = alpha* t + beta*`` whose
parameters it cannot observe, and corrects it into a logical clock
``tau = alpha * tau* + beta``.  Every round (t_k = k * period) nodes
broadcast their hardware reading, logical time and (alpha, beta).  A normal
node then runs two independent weight-learning loops: one drives alpha
toward the neighbors' rate (via the reading-ratio estimate eta), the other
drives beta toward the neighbors' logical time.  Both loops reward a
neighbor by the size of the residual it sends.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ConfigWarning
from .faults import NodeKind, NodeSpec, NoiseSpec, RandomSpec, noise_from_uniform
from .rng import derive_substream
from .topology import TopologyProvider, is_rooted_subgraph
from .wla import RewardSchedule, fixed_weight_matrix

SKEW_REWARD = RewardSchedule(1e-1, 1e-3)
OFFSET_REWARD = RewardSchedule(1e-4, 1e-6)


@dataclass(frozen=True)
class HardwareClock:
    alpha_star: float
    beta_star: float

    def __post_init__(self):
        if not self.alpha_star > 0:
            raise ValueError("alpha_star must be positive")

    def read(self, t):
        return self.alpha_star * t + self.beta_star


def hardware_read(c: HardwareClock, t):
    return c.read(t)


def eta(readings_j, readings_i) -> float:
    """Ratio of reading differences, an estimate of alpha*_j / alpha*_i.

    Each argument is a pair of hardware readings taken at the same two
    distinct instants.
    """
    dj = readings_j[0] - readings_j[1]
    di = readings_i[0] - readings_i[1]
    if di == 0:
        raise ZeroDivisionError("readings of node i do not differ; instants must be distinct")
    return dj / di


@dataclass
class LogicalClockState:
    """Controlled parameters for all nodes, plus the hidden hardware ones."""

    alpha: np.ndarray
    beta: np.ndarray
    alpha_star: np.ndarray
    beta_star: np.ndarray

    def hardware(self, t: float) -> np.ndarray:
        return self.alpha_star * t + self.beta_star

    def logical(self, t: float) -> np.ndarray:
        return self.alpha * self.hardware(t) + self.beta

    @property
    def x_prime(self) -> np.ndarray:
        return self.alpha * self.alpha_star

    @property
    def x_dprime(self) -> np.ndarray:
        return self.alpha * self.beta_star + self.beta


@dataclass(frozen=True)
class ClockConfig:
    topology: TopologyProvider
    nodes: tuple[NodeSpec, ...]
    noise: NoiseSpec = NoiseSpec(5.0)
    skew_noise: NoiseSpec | None = None
    skew_reward: RewardSchedule = SKEW_REWARD
    offset_reward: RewardSchedule = OFFSET_REWARD
    alpha_star_range: tuple[float, float] = (0.7, 1.3)
    beta_star_range: tuple[float, float] = (0.0, 100.0)
    alpha0: float = 1.0
    beta0: float = 0.1
    random_alpha: RandomSpec = RandomSpec(0.0, 5.0)
    random_beta: RandomSpec = RandomSpec(0.0, 50.0)
    period: float = 1.0
    max_iter: int = 1000
    seed: int = 0
    snapshot_steps: tuple[int, ...] = ()
    wla_disabled: bool = False
    faulty_row_total: float = 0.8

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "snapshot_steps", tuple(sorted(set(int(k) for k in self.snapshot_steps))))

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def normal(self) -> list[int]:
        return [i for i, s in enumerate(self.nodes) if not s.is_faulty]

    @property
    def faulty(self) -> list[int]:
        return [i for i, s in enumerate(self.nodes) if s.is_faulty]

    @property
    def skew_noise_spec(self) -> NoiseSpec:
        return self.skew_noise if self.skew_noise is not None else self.noise

    def validate(self) -> None:
        if not self.topology.is_fixed:
            raise ConfigError("topology", "clock synchronization runs on a fixed topology")
        g = self.topology.graph
        if g.n != self.n:
            raise ConfigError("nodes", f"{self.n} node specs for a {g.n}-node topology")
        if not g.is_symmetric():
            raise ConfigError("topology", "clock topology must be undirected (symmetric)")
        lo, hi = self.alpha_star_range
        if not 0 < lo <= hi:
            raise ConfigError("clock.alpha_star", f"need 0 < lo <= hi, got [{lo}, {hi}]")
        if not self.beta_star_range[0] <= self.beta_star_range[1]:
            raise ConfigError("clock.beta_star", "need lo <= hi")
        if not self.period > 0:
            raise ConfigError("clock.period", "must be positive")
        if not 0.0 <= self.faulty_row_total < 1.0:
            raise ConfigError("faulty_rows.total", f"need 0 <= total < 1 (sum a_ij(0) < 1), got {self.faulty_row_total}")
        for k in self.snapshot_steps:
            if not 1 <= k <= self.max_iter:
                raise ConfigError("snapshot_steps", f"step {k} outside [1, {self.max_iter}]")
        normal = self.normal
        if any(not g.in_neighbors[i] for i in range(self.n)):
            raise ConfigError("topology", "every clock node needs at least one neighbor")
        if normal and not is_rooted_subgraph(g, normal):
            warnings.warn("the normal-node subgraph is not rooted", ConfigWarning, stacklevel=2)


@dataclass
class RoundRecord:
    """Everything exchanged and decided in one round, for inspection."""

    k: int
    eta: np.ndarray
    skew_residual: np.ndarray
    offset_residual: np.ndarray
    skew_noise: np.ndarray
    offset_noise: np.ndarray
    skew_weights: np.ndarray
    offset_weights: np.ndarray
    acts_normal: np.ndarray


@dataclass
class ClockTrace:
    times: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    alpha_star: np.ndarray
    beta_star: np.ndarray
    skew_snapshots: dict[int, np.ndarray] = field(default_factory=dict)
    offset_snapshots: dict[int, np.ndarray] = field(default_factory=dict)
    normal: tuple[int, ...] = ()
    faulty: tuple[int, ...] = ()

    @property
    def x_prime(self) -> np.ndarray:
        return self.alpha * self.alpha_star

    @property
    def x_dprime(self) -> np.ndarray:
        return self.alpha * self.beta_star + self.beta

    @property
    def tau(self) -> np.ndarray:
        hw = self.alpha_star[None, :] * self.times[:, None] + self.beta_star[None, :]
        return self.alpha * hw + self.beta

    def disagreement_series(self) -> np.ndarray:
        """(k, 3) array of normal-node spreads in x', x'' and tau."""
        nm = list(self.normal)
        return np.stack(
            [np.ptp(a[:, nm], axis=1) for a in (self.x_prime, self.x_dprime, self.tau)], axis=1
        )


class ClockSimulation:
    """One replica, advanced a round at a time with ``round()``."""

    def __init__(self, cfg: ClockConfig, replica: int = 0):
        cfg.validate()
        self.cfg = cfg
        n = cfg.n
        label = lambda p: derive_substream(cfg.seed, ("clock", replica, p))
        init = label("init")
        a_lo, a_hi = cfg.alpha_star_range
        b_lo, b_hi = cfg.beta_star_range
        alpha_star = a_lo + (a_hi - a_lo) * init.random(n)
        beta_star = b_lo + (b_hi - b_lo) * init.random(n)
        self.state = LogicalClockState(
            np.full(n, float(cfg.alpha0)), np.full(n, float(cfg.beta0)), alpha_star, beta_star
        )
        self._skew_rng = label("skew")
        self._offset_rng = label("offset")
        self._coin_rng = label("coin")
        self._fault_rng = label("fault")
        self.k = 0
        self.adj = cfg.topology.graph.adjacency()
        self.kind = np.array([int(s.kind) for s in cfg.nodes])
        self.p_normal = np.array([s.p_normal for s in cfg.nodes])
        deg = self.adj.sum(axis=1)
        self.frozen = np.where(self.adj, cfg.faulty_row_total / deg[:, None], 0.0)
        self.uniform = np.where(self.adj, ((1.0 - 1.0 / deg) / deg)[:, None], 0.0)
        self.skew_ledger = np.zeros((n, n))
        self.offset_ledger = np.zeros((n, n))
        self.normal = np.array(cfg.normal, dtype=int)

    def time(self, k: int) -> float:
        return k * self.cfg.period

    def eta_matrix(self, k: int) -> np.ndarray:
        """eta[i, j] from hardware readings at rounds k and k-1 (1 and 0 at k = 0)."""
        k1, k2 = (k, k - 1) if k > 0 else (1, 0)
        r1 = self.state.hardware(self.time(k1))
        r2 = self.state.hardware(self.time(k2))
        d = r1 - r2
        return d[None, :] / d[:, None]

    def _rows(self, ledger: np.ndarray, residual: np.ndarray, sched: RewardSchedule) -> np.ndarray:
        if self.cfg.wla_disabled:
            w = self.uniform.copy()
        else:
            if self.k > 0:  # round 0 runs on the initial credibility Q(0) = 1
                ledger[self.normal] -= np.where(self.adj[self.normal], np.abs(residual[self.normal]), 0.0) * sched.theta(self.k)
            w = fixed_weight_matrix(ledger, self.adj, self.normal)
        faulty = self.kind != int(NodeKind.NORMAL)
        w[faulty] = self.frozen[faulty]
        return w

    def skew_step(self, eta_m, w1, acts_normal, fault_alpha):
        """New alpha values and the skew weight matrix for this round."""
        a = self.state.alpha
        residual = eta_m * a[None, :] - a[:, None] + w1
        weights = self._rows(self.skew_ledger, residual, self.cfg.skew_reward)
        new = a + (weights * residual).sum(axis=1)
        new[~acts_normal] = a[~acts_normal] + fault_alpha[~acts_normal]
        return new, weights, residual

    def offset_step(self, alpha_k, w2, acts_normal, fault_beta):
        """New beta values; reads the round-k alpha, not the freshly updated one."""
        st = self.state
        hw = st.hardware(self.time(self.k))
        tau = alpha_k * hw + st.beta
        residual = tau[None, :] - (alpha_k * hw)[:, None] - st.beta[:, None] + w2
        weights = self._rows(self.offset_ledger, residual, self.cfg.offset_reward)
        new = st.beta + (weights * residual).sum(axis=1)
        new[~acts_normal] = st.beta[~acts_normal] + fault_beta[~acts_normal]
        return new, weights, residual

    def round(self) -> RoundRecord:
        cfg = self.cfg
        n = cfg.n
        w1 = noise_from_uniform(cfg.skew_noise_spec.bound, self._skew_rng.random((n, n)))
        w2 = noise_from_uniform(cfg.noise.bound, self._offset_rng.random((n, n)))
        coin = self._coin_rng.random(n)
        fu = self._fault_rng.random((2, n))
        ra, rb = cfg.random_alpha, cfg.random_beta
        fault_alpha = ra.lo + (ra.hi - ra.lo) * fu[0]
        fault_beta = rb.lo + (rb.hi - rb.lo) * fu[1]
        # one coin per round governs both parameters of an IFN
        acts_normal = (self.kind == int(NodeKind.NORMAL)) | (
            (self.kind == int(NodeKind.IFN)) & (coin < self.p_normal)
        )
        eta_m = self.eta_matrix(self.k)
        alpha_k = self.state.alpha.copy()
        new_alpha, skew_w, skew_r = self.skew_step(eta_m, w1, acts_normal, fault_alpha)
        new_beta, off_w, off_r = self.offset_step(alpha_k, w2, acts_normal, fault_beta)
        rec = RoundRecord(self.k, eta_m, skew_r, off_r, w1, w2, skew_w, off_w, acts_normal)
        self.state.alpha = new_alpha
        self.state.beta = new_beta
        self.k += 1
        return rec


def run_clock(cfg: ClockConfig, replica: int = 0) -> ClockTrace:
    sim = ClockSimulation(cfg, replica)
    T = cfg.max_iter
    n = cfg.n
    alpha = np.empty((T + 1, n))
    beta = np.empty((T + 1, n))
    alpha[0], beta[0] = sim.state.alpha, sim.state.beta
    skew_snaps, off_snaps = {}, {}
    for k in range(1, T + 1):
        rec = sim.round()
        alpha[k], beta[k] = sim.state.alpha, sim.state.beta
        if k in cfg.snapshot_steps:
            skew_snaps[k] = rec.skew_weights
            off_snaps[k] = rec.offset_weights
    return ClockTrace(
        times=np.arange(T + 1) * cfg.period,
        alpha=alpha,
        beta=beta,
        alpha_star=sim.state.alpha_star.copy(),
        beta_star=sim.state.beta_star.copy(),
        skew_snapshots=skew_snaps,
        offset_snapshots=off_snaps,
        normal=tuple(cfg.normal),
        faulty=tuple(cfg.faulty),
    )


def clock_disagreement(trace: ClockTrace, k: int, normal=None) -> tuple[float, float, float]:
    """Spreads (max pairwise |.|) of x', x'' and tau over normal nodes at round k."""
    nm = list(trace.normal if normal is None else normal)
    if len(nm) < 2:
        raise ValueError("need at least two normal nodes")
    xp = trace.x_prime[k, nm]
    xd = trace.x_dprime[k, nm]
    t = trace.times[k]
    tau = trace.alpha[k, nm] * (trace.alpha_star[nm] * t + trace.beta_star[nm]) + trace.beta[k, nm]
    return float(np.ptp(xp)), float(np.ptp(xd)), float(np.ptp(tau))
