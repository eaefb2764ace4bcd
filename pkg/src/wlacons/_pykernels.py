"""Numpy implementation of the consensus step loop.

Used when the compiled extension is unavailable or ``WLACONS_BACKEND=python``.
Same arguments and in-place effects as ``_ckernels.advance``; row sums are
reduced in a different order, so results agree to rounding, not bit for bit.
"""

from __future__ import annotations

import numpy as np


def advance(x, L, rho, held, cur, kind, p_normal, a0, adj, chan, proc, coin, fault,
            k0, theta0, theta_slope, stochastic, gamma, states_out):
    n = x.shape[0]
    normal = kind == 0
    faulty = ~normal
    acts_normal_if_ifn = kind == 2
    fixed_adj = adj.shape[0] == 1
    for t in range(states_out.shape[0]):
        m = adj[0 if fixed_adj else t].astype(bool)
        # credibility starts at Q(0) = 1: step 0 uses uniform rows, rewards begin at k = 1
        theta = theta0 + theta_slope * (k0 + t) if k0 + t > 0 else 0.0
        diff = x[None, :] - x[:, None]  # [i, j] = x_j - x_i
        lr = -np.abs(diff + chan[t]) * theta

        mn = m[normal]
        if stochastic:
            # rho's diagonal is never written, so it stays 0 and L_ii is untouched
            r = np.where(mn, lr[normal], rho[normal])
            rho[normal] = r
            L[normal] += r
        else:
            L[normal] += np.where(mn, lr[normal], 0.0)

        deg = m.sum(axis=1)
        masked = np.where(m, L, -np.inf)
        mx = masked.max(axis=1)
        mx[deg == 0] = 0.0
        e = np.where(m, np.exp(masked - mx[:, None]), 0.0)
        tot = e.sum(axis=1)
        tot[deg == 0] = 1.0
        if stochastic:
            scale = np.full(n, gamma)
        else:
            scale = 1.0 - 1.0 / np.maximum(deg, 1)
        w = e / tot[:, None] * scale[:, None]
        w[faulty] = np.where(m[faulty], a0[faulty], 0.0)
        cur[:] = w
        held[m] = w[m]

        xn = x + (w * diff).sum(axis=1) + proc[t]
        random_action = faulty & ~(acts_normal_if_ifn & (coin[t] < p_normal))
        xn[random_action] = x[random_action] + fault[t][random_action]
        states_out[t] = xn
        x[:] = xn
