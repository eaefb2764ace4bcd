"""Weight learning: rewards, credibility ledgers and trust-weighted rows.

Credibility is kept in the log domain.  ``L_ij`` is the running sum of
log-rewards, so ``Q_ij = exp(L_ij)``.  Weights are formed by subtracting the
row maximum before exponentiating, which leaves the Q-ratios unchanged and
keeps the largest term at exactly 1, so nothing underflows to 0/0 even
after thousands of heavily penalised steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import ConfigError, ContractViolation, StructuralError

DEFAULT_THETA0 = 1e-4
DEFAULT_THETA_SLOPE = 1e-6


@dataclass(frozen=True)
class RewardSchedule:
    """Reward ``exp(-s * theta(k))`` with ``theta(k) = theta0 + theta_slope * k``."""

    theta0: float = DEFAULT_THETA0
    theta_slope: float = DEFAULT_THETA_SLOPE

    def __post_init__(self):
        if not self.theta0 > 0:
            raise ConfigError("reward.theta0", f"must be > 0, got {self.theta0}")
        if not self.theta_slope >= 0:
            raise ConfigError("reward.theta_slope", f"must be >= 0, got {self.theta_slope}")

    def theta(self, k: int) -> float:
        return self.theta0 + self.theta_slope * k


def log_reward(sched: RewardSchedule, s: float, k: int) -> float:
    if s < 0:
        raise ValueError(f"discrepancy must be nonnegative, got {s}")
    return -s * sched.theta(k)


@dataclass
class CredibilityLedger:
    """Log-credibility state of one normal node.

    ``last_log_reward`` is only present for the stochastic-topology variant,
    which re-applies a neighbor's most recent log-reward on steps the
    neighbor is out of contact.
    """

    owner: int
    log_credibility: dict[int, float]
    last_log_reward: dict[int, float] | None = None

    @classmethod
    def for_fixed(cls, owner: int, neighbors: Iterable[int]) -> "CredibilityLedger":
        return cls(owner, {j: 0.0 for j in sorted(neighbors)})

    @classmethod
    def for_stochastic(cls, owner: int, n: int) -> "CredibilityLedger":
        others = [j for j in range(n) if j != owner]
        return cls(owner, {j: 0.0 for j in others}, {j: 0.0 for j in others})

    @property
    def stochastic(self) -> bool:
        return self.last_log_reward is not None

    def copy(self) -> "CredibilityLedger":
        return CredibilityLedger(
            self.owner,
            dict(self.log_credibility),
            None if self.last_log_reward is None else dict(self.last_log_reward),
        )


@dataclass(frozen=True)
class WeightRow:
    owner: int
    weights: Mapping[int, float] = field(default_factory=dict)

    def get(self, j: int) -> float:
        return self.weights.get(j, 0.0)

    def total(self) -> float:
        return math.fsum(self.weights.values())


def observe_fixed(
    ledger: CredibilityLedger,
    observations: Mapping[int, float],
    k: int,
    sched: RewardSchedule,
) -> CredibilityLedger:
    """Add this step's log-reward for every tracked neighbor.

    ``observations`` maps neighbor ``j`` to ``s_ij = |x_j - x_i + w_ij|``
    and must cover exactly the tracked neighbors.
    """
    if set(observations) != set(ledger.log_credibility):
        extra = set(observations) - set(ledger.log_credibility)
        if extra:
            raise ContractViolation(f"observations for untracked nodes {sorted(extra)}")
        raise ContractViolation(
            f"missing observations for {sorted(set(ledger.log_credibility) - set(observations))}"
        )
    out = ledger.copy()
    for j, s in observations.items():
        out.log_credibility[j] += log_reward(sched, s, k)
    return out


def observe_stochastic(
    ledger: CredibilityLedger,
    current_neighbors: Iterable[int],
    observations: Mapping[int, float],
    k: int,
    sched: RewardSchedule,
) -> CredibilityLedger:
    """Fresh log-reward for current neighbors, stale one re-applied for the rest."""
    if not ledger.stochastic:
        raise ContractViolation("ledger was created for the fixed-topology variant")
    current = set(current_neighbors)
    if set(observations) != current:
        raise ContractViolation("observations must be keyed exactly by the current neighbors")
    untracked = current - set(ledger.log_credibility)
    if untracked:
        raise ContractViolation(f"observations for untracked nodes {sorted(untracked)}")
    out = ledger.copy()
    for j in out.log_credibility:
        if j in current:
            out.last_log_reward[j] = log_reward(sched, observations[j], k)
        out.log_credibility[j] += out.last_log_reward[j]
    return out


def normalized_row(log_cred: np.ndarray, scale: float) -> np.ndarray:
    """``scale * exp(L - max L) / sum(exp(L - max L))``; empty input gives empty output."""
    if log_cred.size == 0:
        return log_cred.astype(float)
    e = np.exp(log_cred - log_cred.max())
    return e / e.sum() * scale


def _row(ledger: CredibilityLedger, nbrs: list[int], scale: float) -> WeightRow:
    try:
        vals = np.array([ledger.log_credibility[j] for j in nbrs], dtype=float)
    except KeyError as exc:
        raise ContractViolation(f"neighbor {exc.args[0]} is not tracked by the ledger") from None
    return WeightRow(ledger.owner, dict(zip(nbrs, normalized_row(vals, scale).tolist())))


def weights_fixed(ledger: CredibilityLedger, neighbors: Iterable[int]) -> WeightRow:
    nbrs = sorted(neighbors)
    if not nbrs:
        raise StructuralError(f"node {ledger.owner} has no in-neighbors")
    return _row(ledger, nbrs, 1.0 - 1.0 / len(nbrs))


def weights_stochastic(ledger: CredibilityLedger, current_neighbors: Iterable[int], gamma: float) -> WeightRow:
    if not 0.0 < gamma < 1.0:
        raise ConfigError("gamma", f"must lie in (0, 1), got {gamma}")
    nbrs = sorted(current_neighbors)
    if not nbrs:
        return WeightRow(ledger.owner, {})
    return _row(ledger, nbrs, gamma)


def faulty_weight_row(initial: WeightRow, current_neighbors: Iterable[int] | None = None) -> WeightRow:
    """The frozen row a faulty node keeps for the whole run.

    With ``current_neighbors`` the row is restricted to that set, as in
    stochastic topologies where absent neighbors carry no weight.
    """
    if any(w < 0 for w in initial.weights.values()):
        raise ConfigError("faulty_rows", f"node {initial.owner}: weights must be nonnegative")
    if not initial.total() < 1.0:
        raise ConfigError(
            "faulty_rows",
            f"node {initial.owner}: initial weights sum to {initial.total():g}; need sum a_ij(0) < 1",
        )
    if current_neighbors is None:
        return initial
    cur = set(current_neighbors)
    return WeightRow(initial.owner, {j: w for j, w in initial.weights.items() if j in cur})


def uniform_faulty_row(owner: int, neighbors: Iterable[int], total: float = 0.8) -> WeightRow:
    nbrs = sorted(neighbors)
    if not nbrs:
        return WeightRow(owner, {})
    return faulty_weight_row(WeightRow(owner, {j: total / len(nbrs) for j in nbrs}))


def fixed_weight_matrix(log_cred: np.ndarray, adj: np.ndarray, rows: Iterable[int]) -> np.ndarray:
    """Fixed-topology weight rows for ``rows`` from a dense ledger matrix.

    Entry [i, j] of the result is ``a_ij`` for i in ``rows`` and 0 elsewhere.
    Every listed row must have at least one neighbor.
    """
    n = adj.shape[0]
    out = np.zeros((n, n))
    for i in rows:
        nbrs = np.flatnonzero(adj[i])
        if nbrs.size == 0:
            raise StructuralError(f"node {i} has no in-neighbors")
        out[i, nbrs] = normalized_row(log_cred[i, nbrs], 1.0 - 1.0 / nbrs.size)
    return out
