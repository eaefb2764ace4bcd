"""Experiment configuration files (YAML) and their validation.

See ``presets/*.yaml`` for commented examples of every block.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .clocksync import OFFSET_REWARD, SKEW_REWARD, ClockConfig
from .consensus import SimConfig
from .errors import ConfigError
from .faults import NodeKind, NodeSpec, NoiseSpec, RandomSpec
from .topology import Digraph, TopologyProvider
from .wla import RewardSchedule

KINDS = ("consensus", "clock", "sweep")
FORMATS = ("csv", "json")

_TOP_KEYS = {
    "name", "kind", "seed", "max_iter", "threshold", "replicas", "topology", "nodes", "noise",
    "reward", "gamma", "init_state", "snapshot_steps", "log_topology", "sweep", "clock", "output",
    "description",
}


@dataclass(frozen=True)
class SweepSpec:
    ifn_nodes: tuple[int, ...]
    probs: tuple[float, ...]
    reps: int


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    name: str = ""
    sim: SimConfig | None = None
    clock: ClockConfig | None = None
    sweep: SweepSpec | None = None
    threshold: float = 5.0
    replicas: int = 1
    output_dir: str | None = None
    output_format: str = "csv"
    description: str = ""

    def with_seed(self, seed: int) -> "ExperimentConfig":
        seed = int(seed)
        sim = dataclasses.replace(self.sim, seed=seed) if self.sim else None
        clock = dataclasses.replace(self.clock, seed=seed) if self.clock else None
        return dataclasses.replace(self, seed=seed, sim=sim, clock=clock)

    def with_snapshot_steps(self, steps) -> "ExperimentConfig":
        steps = tuple(int(k) for k in steps)
        sim = dataclasses.replace(self.sim, snapshot_steps=steps) if self.sim else None
        clock = dataclasses.replace(self.clock, snapshot_steps=steps) if self.clock else None
        out = dataclasses.replace(self, sim=sim, clock=clock)
        validate(out)
        return out

    def digest(self) -> str:
        blob = json.dumps(to_dict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


# ---------------------------------------------------------------- parsing

def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"{where}.{key}" if where else key, "missing")
    return d[key]


def _pair(value, field: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(field, f"expected [lo, hi], got {value!r}") from None
    return lo, hi


def _node_list(value, field: str) -> list[int]:
    if value is None:
        return []
    if isinstance(value, dict):
        if set(value) != {"range"}:
            raise ConfigError(field, "expected a list of ids or {range: [start, stop]}")
        start, stop = value["range"]
        return list(range(int(start), int(stop)))
    try:
        return [int(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(field, f"expected a list of node ids, got {value!r}") from None


def _reward(d: dict | None, default: RewardSchedule, field: str) -> RewardSchedule:
    if d is None:
        return default
    extra = set(d) - {"theta0", "theta_slope"}
    if extra:
        raise ConfigError(field, f"unknown keys {sorted(extra)}")
    return RewardSchedule(float(d.get("theta0", default.theta0)), float(d.get("theta_slope", default.theta_slope)))


def _topology(d: dict) -> TopologyProvider:
    if not isinstance(d, dict):
        raise ConfigError("topology", "expected a mapping")
    if "stochastic" in d:
        s = d["stochastic"]
        return TopologyProvider.stochastic(
            int(_require(s, "n", "topology.stochastic")),
            float(_require(s, "edge_prob", "topology.stochastic")),
            bool(s.get("symmetric", True)),
        )
    n = int(_require(d, "n", "topology"))
    edges = _require(d, "edges", "topology")
    try:
        g = Digraph.from_edges(n, [tuple(e) for e in edges], symmetric=bool(d.get("symmetric", True)))
    except (ValueError, IndexError) as exc:
        raise ConfigError("topology.edges", str(exc)) from None
    return TopologyProvider.fixed(g)


def _nodes(d: dict | None, n: int) -> tuple[list[NodeSpec], float, dict | None]:
    d = d or {}
    extra = set(d) - {"pfn", "ifn", "p_normal", "random", "faulty_rows"}
    if extra:
        raise ConfigError("nodes", f"unknown keys {sorted(extra)}")
    pfn = _node_list(d.get("pfn"), "nodes.pfn")
    ifn = _node_list(d.get("ifn"), "nodes.ifn")
    if set(pfn) & set(ifn):
        raise ConfigError("nodes", f"nodes {sorted(set(pfn) & set(ifn))} are both PFN and IFN")
    for i in pfn + ifn:
        if not 0 <= i < n:
            raise ConfigError("nodes", f"node id {i} out of range for n={n}")
    p_normal = float(d.get("p_normal", 0.8))
    if not 0.0 <= p_normal <= 1.0:
        raise ConfigError("nodes.p_normal", f"must lie in [0, 1], got {p_normal}")
    rnd = RandomSpec(*_pair(d.get("random", [0.0, 1000.0]), "nodes.random"))
    specs = [NodeSpec.normal() for _ in range(n)]
    for i in pfn:
        specs[i] = NodeSpec(NodeKind.PFN, 0.0, rnd)
    for i in ifn:
        specs[i] = NodeSpec(NodeKind.IFN, p_normal, rnd)
    fr = d.get("faulty_rows") or {}
    extra = set(fr) - {"total", "rows"}
    if extra:
        raise ConfigError("nodes.faulty_rows", f"unknown keys {sorted(extra)}")
    total = float(fr.get("total", 0.8))
    rows = fr.get("rows")
    if rows is not None:
        rows = {int(i): {int(j): float(w) for j, w in row.items()} for i, row in rows.items()}
    return specs, total, rows


def from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("", "config must be a mapping")
    extra = set(d) - _TOP_KEYS
    if extra:
        raise ConfigError("", f"unknown top-level keys {sorted(extra)}")
    kind = d.get("kind", "consensus")
    if kind not in KINDS:
        raise ConfigError("kind", f"must be one of {KINDS}, got {kind!r}")
    seed = int(d.get("seed", 0))
    max_iter = int(d.get("max_iter", 1000))
    topo = _topology(_require(d, "topology", ""))
    n = topo.num_nodes
    specs, total, rows = _nodes(d.get("nodes"), n)
    snaps = tuple(int(k) for k in d.get("snapshot_steps", ()) or ())
    out = d.get("output") or {}
    common = dict(
        kind=kind,
        seed=seed,
        name=str(d.get("name", "")),
        description=str(d.get("description", "")),
        threshold=float(d.get("threshold", 5.0)),
        replicas=int(d.get("replicas", 1)),
        output_dir=out.get("dir"),
        output_format=str(out.get("format", "csv")),
    )

    if kind == "clock":
        c = d.get("clock") or {}
        known = {"alpha_star", "beta_star", "alpha0", "beta0", "random_alpha", "random_beta", "period",
                 "skew_reward", "offset_reward", "skew_noise", "wla_disabled"}
        if set(c) - known:
            raise ConfigError("clock", f"unknown keys {sorted(set(c) - known)}")
        skew_noise = c.get("skew_noise")
        clock = ClockConfig(
            topology=topo,
            nodes=tuple(specs),
            noise=NoiseSpec(float(d.get("noise", 5.0))),
            skew_noise=None if skew_noise is None else NoiseSpec(float(skew_noise)),
            skew_reward=_reward(c.get("skew_reward"), SKEW_REWARD, "clock.skew_reward"),
            offset_reward=_reward(c.get("offset_reward"), OFFSET_REWARD, "clock.offset_reward"),
            alpha_star_range=_pair(c.get("alpha_star", [0.7, 1.3]), "clock.alpha_star"),
            beta_star_range=_pair(c.get("beta_star", [0.0, 100.0]), "clock.beta_star"),
            alpha0=float(c.get("alpha0", 1.0)),
            beta0=float(c.get("beta0", 0.1)),
            random_alpha=RandomSpec(*_pair(c.get("random_alpha", [0.0, 5.0]), "clock.random_alpha")),
            random_beta=RandomSpec(*_pair(c.get("random_beta", [0.0, 50.0]), "clock.random_beta")),
            period=float(c.get("period", 1.0)),
            max_iter=max_iter,
            seed=seed,
            snapshot_steps=snaps,
            wla_disabled=bool(c.get("wla_disabled", False)),
            faulty_row_total=total,
        )
        if rows:
            raise ConfigError("nodes.faulty_rows.rows", "explicit faulty rows are not supported for clock runs")
        return ExperimentConfig(clock=clock, **common)

    init = d.get("init_state") or {"uniform": [0.0, 1000.0]}
    if set(init) - {"uniform", "values"} or len(init) != 1:
        raise ConfigError("init_state", "expected exactly one of {uniform: [lo, hi]} or {values: [...]}")
    init_range = _pair(init.get("uniform", [0.0, 1000.0]), "init_state.uniform")
    init_values = tuple(float(v) for v in init["values"]) if "values" in init else None
    sim = SimConfig(
        topology=topo,
        nodes=tuple(specs),
        noise=NoiseSpec(float(d.get("noise", 10.0))),
        reward=_reward(d.get("reward"), RewardSchedule(), "reward"),
        gamma=float(d.get("gamma", 0.8)),
        init_range=init_range,
        init_values=init_values,
        max_iter=max_iter,
        seed=seed,
        snapshot_steps=snaps,
        faulty_row_total=total,
        faulty_rows=rows,
        log_topology=bool(d.get("log_topology", False)),
    )
    sweep = None
    if kind == "sweep":
        s = _require(d, "sweep", "")
        sweep = SweepSpec(
            tuple(_node_list(_require(s, "ifn", "sweep"), "sweep.ifn")),
            tuple(float(q) for q in _require(s, "probs", "sweep")),
            int(_require(s, "reps", "sweep")),
        )
    return ExperimentConfig(sim=sim, sweep=sweep, **common)


def validate(cfg: ExperimentConfig) -> None:
    if cfg.output_format not in FORMATS:
        raise ConfigError("output.format", f"must be one of {FORMATS}, got {cfg.output_format!r}")
    if cfg.replicas < 1:
        raise ConfigError("replicas", "must be >= 1")
    if not cfg.threshold > 0:
        raise ConfigError("threshold", "must be positive")
    if cfg.sim is not None:
        cfg.sim.validate()
    if cfg.clock is not None:
        cfg.clock.validate()
    if cfg.sweep is not None:
        if cfg.sweep.reps < 1:
            raise ConfigError("sweep.reps", "must be >= 1")
        for q in cfg.sweep.probs:
            if not 0.0 <= q <= 1.0:
                raise ConfigError("sweep.probs", f"fault probability {q} outside [0, 1]")
        for i in cfg.sweep.ifn_nodes:
            if not 0 <= i < cfg.sim.n:
                raise ConfigError("sweep.ifn", f"node id {i} out of range")


def load_config(path) -> ExperimentConfig:
    """Parse and validate a config file; structural concerns surface as warnings."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError("", f"cannot parse {path}: {exc}") from None
    cfg = from_dict(raw)
    validate(cfg)
    return cfg


# ------------------------------------------------------------ serialising

def _reward_dict(r: RewardSchedule) -> dict:
    return {"theta0": r.theta0, "theta_slope": r.theta_slope}


def _topology_dict(t: TopologyProvider) -> dict:
    if t.is_fixed:
        return {"n": t.graph.n, "symmetric": False, "edges": [list(e) for e in t.graph.edges()]}
    return {"stochastic": {"n": t.n, "edge_prob": t.edge_prob, "symmetric": t.symmetric}}


def _nodes_dict(nodes, total, rows) -> dict:
    pfn = [i for i, s in enumerate(nodes) if s.kind == NodeKind.PFN]
    ifn = [i for i, s in enumerate(nodes) if s.kind == NodeKind.IFN]
    faulty = [nodes[i] for i in pfn + ifn]
    if len({(s.random.lo, s.random.hi) for s in faulty}) > 1 or len({nodes[i].p_normal for i in ifn}) > 1:
        raise ValueError("per-node fault parameters cannot be expressed in the config schema")
    out: dict[str, Any] = {"pfn": pfn, "ifn": ifn}
    if ifn:
        out["p_normal"] = nodes[ifn[0]].p_normal
    if faulty:
        out["random"] = [faulty[0].random.lo, faulty[0].random.hi]
    fr: dict[str, Any] = {"total": total}
    if rows:
        fr["rows"] = {int(i): {int(j): w for j, w in r.items()} for i, r in rows.items()}
    out["faulty_rows"] = fr
    return out


def to_dict(cfg: ExperimentConfig) -> dict:
    """Plain-data form that ``from_dict`` maps back to an equal config."""
    d: dict[str, Any] = {
        "name": cfg.name,
        "kind": cfg.kind,
        "seed": cfg.seed,
        "threshold": cfg.threshold,
        "replicas": cfg.replicas,
        "output": {"dir": cfg.output_dir, "format": cfg.output_format},
    }
    if cfg.description:
        d["description"] = cfg.description
    if cfg.clock is not None:
        c = cfg.clock
        d.update(
            max_iter=c.max_iter,
            topology=_topology_dict(c.topology),
            nodes=_nodes_dict(c.nodes, c.faulty_row_total, None),
            noise=c.noise.bound,
            snapshot_steps=list(c.snapshot_steps),
            clock={
                "alpha_star": list(c.alpha_star_range),
                "beta_star": list(c.beta_star_range),
                "alpha0": c.alpha0,
                "beta0": c.beta0,
                "random_alpha": [c.random_alpha.lo, c.random_alpha.hi],
                "random_beta": [c.random_beta.lo, c.random_beta.hi],
                "period": c.period,
                "skew_reward": _reward_dict(c.skew_reward),
                "offset_reward": _reward_dict(c.offset_reward),
                "skew_noise": None if c.skew_noise is None else c.skew_noise.bound,
                "wla_disabled": c.wla_disabled,
            },
        )
        return d
    s = cfg.sim
    init = {"values": list(s.init_values)} if s.init_values is not None else {"uniform": list(s.init_range)}
    d.update(
        max_iter=s.max_iter,
        topology=_topology_dict(s.topology),
        nodes=_nodes_dict(s.nodes, s.faulty_row_total, s.faulty_rows),
        noise=s.noise.bound,
        reward=_reward_dict(s.reward),
        gamma=s.gamma,
        init_state=init,
        snapshot_steps=list(s.snapshot_steps),
        log_topology=s.log_topology,
    )
    if cfg.sweep is not None:
        d["sweep"] = {"ifn": list(cfg.sweep.ifn_nodes), "probs": list(cfg.sweep.probs), "reps": cfg.sweep.reps}
    return d


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False, default_flow_style=None)


# ----------------------------------------------------------------- presets

def preset_names() -> list[str]:
    root = resources.files("wlacons") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def preset_path(name: str) -> Path:
    if name not in preset_names():
        raise KeyError(f"unknown preset {name!r}; choose from {preset_names()}")
    return Path(str(resources.files("wlacons") / "presets" / f"{name}.yaml"))


def load_preset(name: str) -> ExperimentConfig:
    return load_config(preset_path(name))
