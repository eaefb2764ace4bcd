"""Slow, literal reference implementations used as test oracles.

They work in the product domain (Q = product of rewards) with plain Python
loops, share no code with the package beyond the random draws, and are
only valid for short horizons where the products do not underflow.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from wlacons.consensus import draw_block, initial_state
from wlacons.faults import NodeKind
from wlacons.rng import ReplicaStreams


def reachable_from(adj: np.ndarray, root: int) -> set[int]:
    """Nodes reachable from ``root`` when adj[i, j] means an edge j -> i."""
    n = adj.shape[0]
    seen = {root}
    frontier = [root]
    while frontier:
        j = frontier.pop()
        for i in range(n):
            if adj[i, j] and i not in seen:
                seen.add(i)
                frontier.append(i)
    return seen


def brute_rooted(adj: np.ndarray) -> bool:
    n = adj.shape[0]
    return any(len(reachable_from(adj, r)) == n for r in range(n))


def product_weights_fixed(obs_seq, theta0, slope, k0=0):
    """Weights after feeding observation dicts {j: s} at steps k0, k0+1, ..."""
    nbrs = sorted(obs_seq[0])
    q = {j: 1.0 for j in nbrs}
    for t, obs in enumerate(obs_seq):
        th = theta0 + slope * (k0 + t)
        for j in nbrs:
            q[j] *= math.exp(-obs[j] * th)
    tot = sum(q.values())
    scale = 1.0 - 1.0 / len(nbrs)
    return {j: q[j] / tot * scale for j in nbrs}


def product_weights_stochastic(others, steps, theta0, slope, gamma):
    """``steps`` is a list of (current_neighbors, {j: s}) pairs."""
    q = {j: 1.0 for j in others}
    r = {j: 1.0 for j in others}
    w = {}
    for t, (cur, obs) in enumerate(steps):
        th = theta0 + slope * t
        for j in others:
            if j in cur:
                r[j] = math.exp(-obs[j] * th)
            q[j] *= r[j]
        tot = sum(q[j] for j in cur)
        w = {j: q[j] / tot * gamma for j in cur} if cur else {}
    return w


def reference_run(cfg, steps: int, order_rng=None, replica: int = 0) -> np.ndarray:
    """States x(0..steps) by literal per-node updates in a shuffled order."""
    n = cfg.n
    streams = ReplicaStreams(cfg.seed, replica)
    x = initial_state(cfg, streams).x.copy()
    a0 = cfg.initial_faulty_matrix()
    q = np.ones((n, n))
    r = np.ones((n, n))
    out = [x.copy()]
    for t in range(steps):
        d = draw_block(cfg, streams, 1)
        adj = d.adj[0]
        # Q(0) = 1 is the credibility used at step 0; rewards accrue from k = 1
        th = cfg.reward.theta0 + cfg.reward.theta_slope * t if t > 0 else 0.0
        new = x.copy()
        order = range(n) if order_rng is None else order_rng.permutation(n)
        for i in order:
            spec = cfg.nodes[i]
            nbrs = [j for j in range(n) if adj[i, j]]
            if spec.kind == NodeKind.NORMAL:
                for j in nbrs:
                    f = math.exp(-abs(x[j] - x[i] + d.chan[0, i, j]) * th)
                    if cfg.stochastic:
                        r[i, j] = f
                    else:
                        q[i, j] *= f
                if cfg.stochastic:
                    for j in range(n):
                        if j != i:
                            q[i, j] *= r[i, j]
                if not nbrs:
                    new[i] = x[i] + d.proc[0, i]
                    continue
                tot = sum(q[i, j] for j in nbrs)
                scale = cfg.gamma if cfg.stochastic else 1.0 - 1.0 / len(nbrs)
                new[i] = x[i] + sum(q[i, j] / tot * scale * (x[j] - x[i]) for j in nbrs) + d.proc[0, i]
            elif spec.kind == NodeKind.IFN and d.coin[0, i] < spec.p_normal:
                new[i] = x[i] + sum(a0[i, j] * (x[j] - x[i]) for j in nbrs) + d.proc[0, i]
            else:
                new[i] = x[i] + d.fault[0, i]
        x = new
        out.append(x.copy())
    return np.array(out)


def all_digraphs(n: int):
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    for bits in itertools.product((0, 1), repeat=len(pairs)):
        adj = np.zeros((n, n), dtype=bool)
        for (i, j), b in zip(pairs, bits):
            adj[i, j] = b
        yield adj
