"""Node behaviour classes and the random sources that drive them."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

# 2u - 1 + 2**-53 maps numpy's [0, 1) grid onto a grid symmetric about 0
# that stays strictly inside (-1, 1)
_HALF_ULP = 2.0 ** -53


class NodeKind(enum.IntEnum):
    NORMAL = 0
    PFN = 1
    IFN = 2


@dataclass(frozen=True)
class RandomSpec:
    """Uniform(lo, hi) distribution of a faulty node's random action."""

    lo: float = 0.0
    hi: float = 1000.0

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ConfigError("random", f"need lo <= hi, got [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class NoiseSpec:
    """Zero-mean noise bounded strictly by ``bound`` in magnitude."""

    bound: float = 10.0

    def __post_init__(self):
        if self.bound < 0:
            raise ConfigError("noise", f"bound must be >= 0, got {self.bound}")


@dataclass(frozen=True)
class NodeSpec:
    kind: NodeKind = NodeKind.NORMAL
    p_normal: float = 1.0
    random: RandomSpec = field(default_factory=RandomSpec)

    def __post_init__(self):
        if not 0.0 <= self.p_normal <= 1.0:
            raise ConfigError("p_normal", f"must lie in [0, 1], got {self.p_normal}")

    @classmethod
    def normal(cls) -> "NodeSpec":
        return cls(NodeKind.NORMAL)

    @classmethod
    def pfn(cls, random: RandomSpec | None = None) -> "NodeSpec":
        return cls(NodeKind.PFN, 0.0, random or RandomSpec())

    @classmethod
    def ifn(cls, p_normal: float, random: RandomSpec | None = None) -> "NodeSpec":
        return cls(NodeKind.IFN, p_normal, random or RandomSpec())

    @property
    def is_faulty(self) -> bool:
        return self.kind != NodeKind.NORMAL


def sample_random(spec: RandomSpec, rng: np.random.Generator, size=None):
    u = rng.random(size)
    return spec.lo + (spec.hi - spec.lo) * u


def noise_from_uniform(bound: float, u):
    return bound * (2.0 * u - 1.0 + _HALF_ULP)


def sample_noise(spec: NoiseSpec, rng: np.random.Generator, size=None):
    """Uniform(-bound, bound) draw(s); identically 0 when bound is 0."""
    return noise_from_uniform(spec.bound, rng.random(size))


def ifn_acts_normal(p_normal: float, rng: np.random.Generator, size=None):
    if not 0.0 <= p_normal <= 1.0:
        raise ConfigError("p_normal", f"must lie in [0, 1], got {p_normal}")
    return rng.random(size) < p_normal
