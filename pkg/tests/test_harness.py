import csv
import dataclasses
import hashlib
import json
import subprocess
import sys
import time

import pytest

from wlacons import harness
from wlacons.config import load_preset
from wlacons.harness import run_experiment, run_preset


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_same_seed_same_bytes(tmp_path):
    a = run_preset("fig2-pfn", seed=1, out=tmp_path / "a")
    b = run_preset("fig2-pfn", seed=1, out=tmp_path / "b")
    assert a.outputs_digest == b.outputs_digest
    for f in a.outputs:
        assert (tmp_path / "a" / f["file"]).read_bytes() == (tmp_path / "b" / f["file"]).read_bytes()


def test_different_seed_different_trace(tmp_path):
    a = run_preset("fig2-pfn", seed=1, out=tmp_path / "a")
    b = run_preset("fig2-pfn", seed=2, out=tmp_path / "b")
    assert a.outputs_digest != b.outputs_digest


def test_manifest_contents(tmp_path):
    m = run_preset("fig2-pfn", out=tmp_path)
    on_disk = json.loads((tmp_path / "manifest.json").read_text())
    assert on_disk["outputs_digest"] == m.outputs_digest
    assert on_disk["config_digest"] == load_preset("fig2-pfn").digest()
    for f in on_disk["outputs"]:
        data = (tmp_path / f["file"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == f["sha256"] and len(data) == f["bytes"]
    assert {"trace.csv", "weights.csv", "weights.json", "config.yaml"} <= {f["file"] for f in m.outputs}


def test_trace_file_shape(tmp_path):
    run_preset("fig2-pfn", out=tmp_path)
    rows = read_csv(tmp_path / "trace.csv")
    assert len(rows) == 1001
    assert list(rows[0]) == ["k", "V"] + [f"x_{i}" for i in range(10)]


def test_table1_weights_contains_final_step(tmp_path):
    run_preset("table1-weights", out=tmp_path)
    rows = read_csv(tmp_path / "weights.csv")
    assert {int(r["k"]) for r in rows} == {1000}
    doc = json.loads((tmp_path / "weights.json").read_text())
    m = doc["snapshots"]["1000"]
    assert len(m) == 10 and all(len(r) == 10 for r in m)


def test_topology_log_written(tmp_path):
    cfg = load_preset("fig4-stochastic")
    cfg = dataclasses.replace(cfg, sim=dataclasses.replace(cfg.sim, max_iter=20, log_topology=True))
    run_experiment(cfg, tmp_path)
    rows = read_csv(tmp_path / "topology.csv")
    assert {int(r["k"]) for r in rows} == set(range(1, 21))
    assert all(r["src"] != r["dst"] for r in rows)


def test_json_format(tmp_path):
    m = run_preset("fig2-pfn", out=tmp_path, fmt="json")
    doc = json.loads((tmp_path / "trace.json").read_text())
    assert doc["columns"][:2] == ["k", "V"] and len(doc["rows"]) == 1001
    assert "weights.matrix.json" in {f["file"] for f in m.outputs}


def test_clock_preset_outputs(tmp_path):
    m = run_preset("clock-fig7-wla", out=tmp_path)
    names = {f["file"] for f in m.outputs}
    assert {"clock_trace.csv", "clock_disagreement.csv", "skew_weights.json", "offset_weights.json"} <= names
    assert m.summary["final_dtau"] > 0


def test_sweep_digest_independent_of_jobs(tmp_path):
    cfg = load_preset("fig3-sweep")
    cfg = dataclasses.replace(cfg, sweep=dataclasses.replace(cfg.sweep, probs=(0.0, 0.5, 1.0), reps=6),
                              sim=dataclasses.replace(cfg.sim, max_iter=200, snapshot_steps=()))
    a = run_experiment(cfg, tmp_path / "a", jobs=1)
    b = run_experiment(cfg, tmp_path / "b", jobs=2)
    assert a.outputs_digest == b.outputs_digest


def test_replicas_table(tmp_path):
    cfg = load_preset("fig2-pfn")
    cfg = dataclasses.replace(cfg, replicas=3, sim=dataclasses.replace(cfg.sim, max_iter=100, snapshot_steps=()))
    m = run_experiment(cfg, tmp_path)
    rows = read_csv(tmp_path / "replicas.csv")
    assert [int(r["replica"]) for r in rows] == [0, 1, 2]
    assert m.summary["converged"] == sum(int(r["converged"]) for r in rows)


def test_default_out_dir_env(tmp_path, monkeypatch):
    monkeypatch.setenv(harness.OUT_ENV, str(tmp_path))
    assert harness.default_out_dir("x") == tmp_path / "x"
    run_preset("fig2-pfn")
    assert (tmp_path / "fig2-pfn" / "manifest.json").exists()


def test_no_partial_files_left(tmp_path):
    run_preset("fig2-pfn", out=tmp_path)
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".")]


def cli(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "wlacons.cli", *args], capture_output=True, text=True, cwd=cwd)


def test_cli_preset_smoke(tmp_path):
    r = cli("preset", "fig2-pfn", "--out", str(tmp_path), "--seed", "3")
    assert r.returncode == 0, r.stderr
    out = json.loads(r.stdout)
    assert out["name"] == "fig2-pfn"
    assert json.loads((tmp_path / "manifest.json").read_text())["seed"] == 3


def test_cli_list_and_errors(tmp_path):
    r = cli("preset", "--list")
    assert r.returncode == 0 and "fig2-pfn" in r.stdout.split()
    r = cli("preset", "no-such-preset", "--out", str(tmp_path))
    assert r.returncode == 2 and "no-such-preset" in r.stderr
    bad = tmp_path / "bad.yaml"
    bad.write_text("kind: consensus\ngamma: 3\n")
    r = cli("run", str(bad), "--out", str(tmp_path / "o"))
    assert r.returncode == 2 and "error" in r.stderr


def test_cli_run_with_snapshot_override(tmp_path):
    from wlacons.config import preset_path
    r = cli("run", str(preset_path("fig2-ifn")), "--out", str(tmp_path), "--snapshot-steps", "1,10", "--format", "json")
    assert r.returncode == 0, r.stderr
    doc = json.loads((tmp_path / "weights.matrix.json").read_text())
    assert set(doc["snapshots"]) == {"1", "10"}


def test_cli_sweep_rejects_non_sweep(tmp_path):
    from wlacons.config import preset_path
    r = cli("sweep", str(preset_path("fig2-pfn")), "--out", str(tmp_path))
    assert r.returncode == 2


@pytest.mark.slow
def test_fig3_sweep_runtime(tmp_path):
    t0 = time.perf_counter()
    m = run_preset("fig3-sweep", out=tmp_path)
    assert time.perf_counter() - t0 < 300
    rows = read_csv(tmp_path / "sweep.csv")
    assert len(rows) == len(load_preset("fig3-sweep").sweep.probs)
    assert m.summary["mean_counts"]
