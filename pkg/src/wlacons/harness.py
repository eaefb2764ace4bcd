"""Running configured experiments and writing their outputs.

Every run writes its tables, the resolved config and a ``manifest.json``
that records hashes of everything written.  Floats are written with
``repr``, which round-trips exactly, so two runs with the same config and
seed produce byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import platform
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .clocksync import ClockTrace, run_clock
from .config import ExperimentConfig, dump_config, load_preset, validate
from .consensus import SimTrace, convergence_count, run, sweep_fault_probability
from .rng import DERIVATION, GENERATOR_NAME

OUT_ENV = "WLACONS_OUT"


@dataclass
class Table:
    name: str
    columns: list[str]
    rows: list[list]


@dataclass
class RunManifest:
    name: str
    kind: str
    seed: int
    config_digest: str
    version: str
    backend: str
    generator: str
    derivation: str
    numpy_version: str
    python_version: str
    duration_s: float
    outputs: list[dict] = field(default_factory=list)
    outputs_digest: str = ""
    summary: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def default_out_dir(name: str) -> Path:
    root = os.environ.get(OUT_ENV) or "wlacons-out"
    return Path(root) / (name or "run")


def atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def encode_table(t: Table, fmt: str) -> bytes:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(t.columns)
        for row in t.rows:
            w.writerow([_cell(v) for v in row])
        return buf.getvalue().encode()
    rows = [[float(v) if isinstance(v, np.floating) else int(v) if isinstance(v, np.integer) else v for v in r]
            for r in t.rows]
    return (json.dumps({"columns": t.columns, "rows": rows}, separators=(",", ":")) + "\n").encode()


# ----------------------------------------------------------------- tables

def trace_table(trace: SimTrace) -> Table:
    n = trace.states.shape[1]
    rows = [[k, float(trace.disagreement[k]), *trace.states[k].tolist()] for k in range(len(trace.states))]
    return Table("trace", ["k", "V", *[f"x_{i}" for i in range(n)]], rows)


def weights_table(snapshots: dict[int, np.ndarray], name: str = "weights") -> Table:
    rows = []
    for k in sorted(snapshots):
        a = snapshots[k]
        for i, j in zip(*np.nonzero(a)):
            rows.append([k, int(i), int(j), float(a[i, j])])
    return Table(name, ["k", "i", "j", "a_ij"], rows)


def weights_document(snapshots: dict[int, np.ndarray], n: int) -> dict:
    """Dense snapshot matrices; row i is the receiving node, column j the source."""
    return {
        "format": "wlacons-weights/1",
        "n": n,
        "layout": "matrix[i][j] = weight node i gives to node j",
        "snapshots": {str(k): snapshots[k].tolist() for k in sorted(snapshots)},
    }


def topology_table(trace: SimTrace) -> Table:
    rows = []
    for k, pairs in enumerate(trace.topology_log or [], start=1):
        rows.extend([k, int(src), int(dst)] for src, dst in pairs)
    return Table("topology", ["k", "src", "dst"], rows)


def sweep_table(points) -> Table:
    return Table("sweep", ["fault_prob", "mean_count", "rep_count"],
                 [[p.fault_prob, p.mean_count, p.rep_count] for p in points])


def clock_tables(trace: ClockTrace) -> list[Table]:
    xp, xd, tau = trace.x_prime, trace.x_dprime, trace.tau
    T, n = trace.alpha.shape
    rows = [
        [k, i, float(trace.alpha[k, i]), float(trace.beta[k, i]), float(xp[k, i]), float(xd[k, i]), float(tau[k, i])]
        for k in range(T)
        for i in range(n)
    ]
    dis = trace.disagreement_series()
    out = [
        Table("clock_trace", ["k", "i", "alpha", "beta", "x_prime", "x_dprime", "tau"], rows),
        Table("clock_disagreement", ["k", "dx_prime", "dx_dprime", "dtau"],
              [[k, *map(float, dis[k])] for k in range(T)]),
    ]
    if trace.skew_snapshots:
        out.append(weights_table(trace.skew_snapshots, "skew_weights"))
        out.append(weights_table(trace.offset_snapshots, "offset_weights"))
    return out


# ------------------------------------------------------------------ runs

def _replica_summary(args):
    sim, replica, threshold = args
    tr = run(sim, replica, validate=False)
    converged = int(bool((tr.disagreement < threshold).any()))
    return [replica, convergence_count(tr, threshold), converged, float(tr.disagreement[-1])]


def execute(cfg: ExperimentConfig, jobs: int = 1) -> tuple[list[Table], dict, dict]:
    """Run ``cfg``; returns output tables, JSON documents by name, and a summary."""
    validate(cfg)
    if cfg.kind == "clock":
        tr = run_clock(cfg.clock)
        final = tr.disagreement_series()[-1]
        summary = {"final_dx_prime": float(final[0]), "final_dx_dprime": float(final[1]), "final_dtau": float(final[2])}
        docs = {}
        if tr.skew_snapshots:
            docs["skew_weights"] = weights_document(tr.skew_snapshots, cfg.clock.n)
            docs["offset_weights"] = weights_document(tr.offset_snapshots, cfg.clock.n)
        return clock_tables(tr), docs, summary
    if cfg.kind == "sweep":
        pts = sweep_fault_probability(cfg.sim, cfg.sweep.ifn_nodes, cfg.sweep.probs, cfg.sweep.reps,
                                      cfg.threshold, jobs=jobs)
        return [sweep_table(pts)], {}, {"mean_counts": {repr(p.fault_prob): p.mean_count for p in pts}}
    if cfg.replicas == 1:
        tr = run(cfg.sim, 0, validate=False)
        tables = [trace_table(tr)]
        docs = {}
        if tr.weight_snapshots:
            tables.append(weights_table(tr.weight_snapshots))
            docs["weights"] = weights_document(tr.weight_snapshots, cfg.sim.n)
        if tr.topology_log is not None:
            tables.append(topology_table(tr))
        summary = {"convergence_count": convergence_count(tr, cfg.threshold), "final_V": float(tr.disagreement[-1])}
        return tables, docs, summary
    tasks = [(cfg.sim, r, cfg.threshold) for r in range(cfg.replicas)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_replica_summary, tasks))
    else:
        rows = [_replica_summary(t) for t in tasks]
    counts = [r[1] for r in rows]
    summary = {
        "mean_count": float(np.mean(counts)),
        "converged": sum(r[2] for r in rows),
        "min_final_V": min(r[3] for r in rows),
    }
    return [Table("replicas", ["replica", "convergence_count", "converged", "final_V"], rows)], {}, summary


def run_experiment(cfg: ExperimentConfig, out: str | os.PathLike | None = None, jobs: int = 1,
                   fmt: str | None = None) -> RunManifest:
    fmt = fmt or cfg.output_format
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown output format {fmt!r}")
    out_dir = Path(out) if out is not None else Path(cfg.output_dir) if cfg.output_dir else default_out_dir(cfg.name)
    t0 = time.perf_counter()
    tables, docs, summary = execute(cfg, jobs)
    duration = time.perf_counter() - t0

    payloads = [(f"{t.name}.{fmt}", encode_table(t, fmt)) for t in tables]
    for name, doc in docs.items():
        fname = f"{name}.matrix.json" if fmt == "json" else f"{name}.json"
        payloads.append((fname, (json.dumps(doc, separators=(",", ":")) + "\n").encode()))
    payloads.append(("config.yaml", dump_config(cfg).encode()))
    files = []
    for fname, data in payloads:
        atomic_write(out_dir / fname, data)
        files.append({"file": fname, "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)})

    combined = hashlib.sha256()
    for f in sorted(files, key=lambda f: f["file"]):
        combined.update(f"{f['file']}\0{f['sha256']}\n".encode())
    manifest = RunManifest(
        name=cfg.name,
        kind=cfg.kind,
        seed=cfg.seed,
        config_digest=cfg.digest(),
        version=__version__,
        backend=kernels.BACKEND if cfg.kind != "clock" else "numpy",
        generator=GENERATOR_NAME,
        derivation=DERIVATION,
        numpy_version=np.__version__,
        python_version=platform.python_version(),
        duration_s=round(duration, 6),
        outputs=files,
        outputs_digest=combined.hexdigest(),
        summary=summary,
    )
    atomic_write(out_dir / "manifest.json", manifest.to_json().encode())
    return manifest


def run_preset(name: str, seed: int | None = None, out=None, jobs: int = 1, fmt: str | None = None) -> RunManifest:
    cfg = load_preset(name)
    if seed is not None:
        cfg = cfg.with_seed(seed)
    return run_experiment(cfg, out, jobs, fmt)
