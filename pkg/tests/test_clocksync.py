import dataclasses

import numpy as np
import pytest

from wlacons.clocksync import (
    ClockConfig,
    ClockSimulation,
    ClockTrace,
    HardwareClock,
    clock_disagreement,
    eta,
    hardware_read,
    run_clock,
)
from wlacons.errors import ConfigError
from wlacons.faults import NodeSpec, NoiseSpec
from wlacons.topology import Digraph, TopologyProvider, canonical_clock_topology


def faultless(n_iter, noise=0.0, seed=0, graph=None):
    g = graph or canonical_clock_topology()
    return ClockConfig(TopologyProvider.fixed(g), tuple(NodeSpec.normal() for _ in range(g.n)),
                       noise=NoiseSpec(noise), max_iter=n_iter, seed=seed)


def test_hardware_read_examples():
    assert hardware_read(HardwareClock(1.0, 0.0), 42.5) == 42.5
    assert hardware_read(HardwareClock(1.3, 100.0), 10) == pytest.approx(113.0, abs=1e-12)
    c = HardwareClock(0.9, 37.0)
    assert c.read(17.0) - c.read(5.0) == pytest.approx(0.9 * 12.0, abs=1e-12)
    with pytest.raises(ValueError):
        HardwareClock(0.0, 1.0)


def test_eta_examples():
    c = HardwareClock(1.1, 3.0)
    assert eta((c.read(4), c.read(2)), (c.read(4), c.read(2))) == 1.0
    cj, ci = HardwareClock(1.2, 55.0), HardwareClock(0.8, 9.0)
    assert eta((cj.read(3), cj.read(7)), (ci.read(3), ci.read(7))) == pytest.approx(1.5, abs=1e-12)
    r = (cj.read(3), cj.read(7)), (ci.read(3), ci.read(7))
    assert eta(r[0], r[1]) * eta(r[1], r[0]) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ZeroDivisionError):
        eta((1.0, 2.0), (5.0, 5.0))


def test_eta_exactness_on_random_pairs():
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        aj, ai = rng.uniform(0.7, 1.3, 2)
        bj, bi = rng.uniform(0, 100, 2)
        t1, t2 = rng.uniform(0, 1000, 2)
        cj, ci = HardwareClock(aj, bj), HardwareClock(ai, bi)
        est = eta((cj.read(t1), cj.read(t2)), (ci.read(t1), ci.read(t2)))
        assert abs(est - aj / ai) <= 1e-12 * max(1.0, 1.0 / abs(t1 - t2))


def test_eta_matrix_uses_consecutive_rounds():
    sim = ClockSimulation(faultless(5, seed=3))
    a = sim.state.alpha_star
    for k in (0, 1, 4):
        e = sim.eta_matrix(k)
        assert np.allclose(e, a[None, :] / a[:, None], rtol=1e-12, atol=0)


def test_identical_clocks_are_a_fixed_point():
    g = canonical_clock_topology()
    cfg = dataclasses.replace(faultless(50, graph=g), alpha_star_range=(1.1, 1.1), beta_star_range=(20.0, 20.0))
    tr = run_clock(cfg)
    assert np.all(tr.alpha == 1.0)
    assert np.allclose(tr.beta, 0.1, rtol=0, atol=1e-12)


def two_node_sim(noise=0.0, seed=1):
    g = Digraph.from_edges(2, [(0, 1)], symmetric=True)
    return ClockSimulation(faultless(20, noise=noise, seed=seed, graph=g))


def test_skew_residual_identity_two_nodes():
    sim = two_node_sim()
    for _ in range(20):
        st = sim.state
        xp = st.x_prime.copy()
        a, astar = st.alpha.copy(), st.alpha_star
        e = sim.eta_matrix(sim.k)
        for i, j in ((0, 1), (1, 0)):
            assert xp[j] - xp[i] == pytest.approx(astar[i] * (e[i, j] * a[j] - a[i]), abs=1e-12)
        sim.round()


def test_offset_residual_identity_two_nodes():
    sim = two_node_sim()
    for _ in range(20):
        st = sim.state
        t = sim.time(sim.k)
        xp, xd = st.x_prime.copy(), st.x_dprime.copy()
        rec = sim.round()
        for i, j in ((0, 1), (1, 0)):
            want = xp[j] * t + xd[j] - xp[i] * t - xd[i]
            assert rec.offset_residual[i, j] == pytest.approx(want, abs=1e-9)


def test_run_zero_horizon():
    tr = run_clock(faultless(0, noise=5.0))
    assert tr.alpha.shape == (1, 16)
    assert np.all(tr.alpha == 1.0) and np.all(tr.beta == 0.1)
    assert np.allclose(tr.tau[0], tr.alpha[0] * tr.beta_star + tr.beta[0])


def test_noiseless_faultless_skew_sync():
    tr = run_clock(faultless(1000, seed=2))
    assert clock_disagreement(tr, 1000)[0] < 1e-6
    d = tr.disagreement_series()[:, 0]
    # decay is visible until roundoff takes over around k = 150
    assert np.all(np.diff(d[0:101:10]) < 0)


def test_noiseless_faultless_time_sync():
    tr = run_clock(faultless(2000, seed=2))
    assert clock_disagreement(tr, 2000)[2] < 1e-3
    d = tr.disagreement_series()[:, 2]
    assert np.all(np.diff(d[0:101:10]) < 0)


def fidelity_rounds(cfg, rounds):
    sim = ClockSimulation(cfg)
    nm = np.array(cfg.normal)
    for _ in range(rounds):
        st = sim.state
        t = sim.time(sim.k)
        xp0, xd0 = st.x_prime.copy(), st.x_dprime.copy()
        astar, bstar = st.alpha_star, st.beta_star
        rec = sim.round()
        xp1, xd1 = sim.state.x_prime, sim.state.x_dprime
        yield nm, t, xp0, xd0, xp1, xd1, astar, bstar, rec


def test_skew_derivation_fidelity(clock_wla):
    cfg = dataclasses.replace(clock_wla, max_iter=300, snapshot_steps=())
    for nm, t, xp0, xd0, xp1, xd1, astar, bstar, rec in fidelity_rounds(cfg, 300):
        a = rec.skew_weights
        # noise enters scaled by the receiving node's own skew
        w_i = (a * rec.skew_noise).sum(axis=1) * astar
        model = xp0 + (a * (xp0[None, :] - xp0[:, None])).sum(axis=1) + w_i
        assert np.max(np.abs((xp1 - model)[nm])) <= 1e-9


def test_offset_derivation_fidelity(clock_wla):
    cfg = dataclasses.replace(clock_wla, max_iter=300, snapshot_steps=())
    for nm, t, xp0, xd0, xp1, xd1, astar, bstar, rec in fidelity_rounds(cfg, 300):
        a = rec.offset_weights
        w_i = (xp1 - xp0) * bstar / astar + (a * ((xp0[None, :] - xp0[:, None]) * t + rec.offset_noise)).sum(axis=1)
        model = xd0 + (a * (xd0[None, :] - xd0[:, None])).sum(axis=1) + w_i
        assert np.max(np.abs((xd1 - model)[nm])) <= 1e-6


def test_faulty_nodes_follow_random_increments(clock_wla):
    cfg = dataclasses.replace(clock_wla, max_iter=50, snapshot_steps=())
    sim = ClockSimulation(cfg)
    for _ in range(50):
        a0, b0 = sim.state.alpha.copy(), sim.state.beta.copy()
        rec = sim.round()
        for i in (1, 7):  # permanently faulty
            assert not rec.acts_normal[i]
            assert 0 <= sim.state.alpha[i] - a0[i] <= 5
            assert 0 <= sim.state.beta[i] - b0[i] <= 50
        assert np.allclose(rec.skew_weights[[1, 5, 7, 11]].sum(axis=1), 0.8, atol=1e-12)


def test_clock_runs_are_deterministic(clock_wla):
    cfg = dataclasses.replace(clock_wla, max_iter=200, snapshot_steps=())
    a, b = run_clock(cfg), run_clock(cfg)
    assert np.array_equal(a.alpha, b.alpha) and np.array_equal(a.beta, b.beta)


def test_weight_rows_sum_to_scale(clock_wla):
    cfg = dataclasses.replace(clock_wla, max_iter=100, snapshot_steps=(100,))
    tr = run_clock(cfg)
    deg = canonical_clock_topology().adjacency().sum(axis=1)
    for m in (tr.skew_snapshots[100], tr.offset_snapshots[100]):
        for i in cfg.normal:
            assert m[i].sum() == pytest.approx(1 - 1 / deg[i], abs=1e-12)


def test_wla_disabled_uses_uniform_rows(clock_nowla):
    cfg = dataclasses.replace(clock_nowla, max_iter=10, snapshot_steps=(10,))
    tr = run_clock(cfg)
    adj = canonical_clock_topology().adjacency()
    deg = adj.sum(axis=1)
    for i in cfg.normal:
        row = tr.skew_snapshots[10][i]
        assert np.allclose(row[adj[i]], (1 - 1 / deg[i]) / deg[i], atol=1e-15)


def test_clock_disagreement_examples():
    tr = ClockTrace(times=np.arange(11.0), alpha=np.tile([1.0, 1.1], (11, 1)), beta=np.tile([5.0, 7.0], (11, 1)),
                    alpha_star=np.array([1.0, 1.0]), beta_star=np.array([0.0, 0.0]), normal=(0, 1))
    got = clock_disagreement(tr, 10)
    assert got == pytest.approx((0.1, 2.0, 3.0), abs=1e-12)
    same = ClockTrace(times=np.arange(3.0), alpha=np.ones((3, 3)), beta=np.ones((3, 3)),
                      alpha_star=np.ones(3), beta_star=np.ones(3), normal=(0, 1, 2))
    assert clock_disagreement(same, 2) == (0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        clock_disagreement(tr, 10, normal=[0])


def test_clock_disagreement_permutation_invariant(clock_wla):
    tr = run_clock(dataclasses.replace(clock_wla, max_iter=30, snapshot_steps=()))
    nm = list(tr.normal)
    assert clock_disagreement(tr, 30, nm) == clock_disagreement(tr, 30, nm[::-1])


def test_clock_config_validation(clock_wla):
    with pytest.raises(ConfigError):
        dataclasses.replace(clock_wla, topology=TopologyProvider.stochastic(16, 0.5)).validate()
    directed = Digraph.from_edges(16, [(i, (i + 1) % 16) for i in range(16)])
    with pytest.raises(ConfigError, match="symmetric"):
        dataclasses.replace(clock_wla, topology=TopologyProvider.fixed(directed)).validate()
    with pytest.raises(ConfigError):
        dataclasses.replace(clock_wla, faulty_row_total=1.0).validate()
