# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled consensus step loop.  Mirrors ``_pykernels.advance`` exactly."""

from libc.math cimport exp, fabs, INFINITY

ctypedef unsigned char uint8


def advance(double[::1] x,
            double[:, ::1] L,
            double[:, ::1] rho,
            double[:, ::1] held,
            double[:, ::1] cur,
            const signed char[::1] kind,
            const double[::1] p_normal,
            const double[:, ::1] a0,
            const uint8[:, :, ::1] adj,
            const double[:, :, ::1] chan,
            const double[:, ::1] proc,
            const double[:, ::1] coin,
            const double[:, ::1] fault,
            long k0,
            double theta0,
            double theta_slope,
            bint stochastic,
            double gamma,
            double[:, ::1] states_out):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t steps = states_out.shape[0]
    cdef bint fixed_adj = adj.shape[0] == 1
    cdef Py_ssize_t t, i, j, a_t
    cdef double theta, xi, s, lr, mx, tot, acc, scale, w
    cdef long deg
    cdef double[::1] xn

    for t in range(steps):
        a_t = 0 if fixed_adj else t
        # credibility starts at Q(0) = 1: step 0 uses uniform rows, rewards begin at k = 1
        theta = theta0 + theta_slope * (k0 + t) if k0 + t > 0 else 0.0
        xn = states_out[t]
        for i in range(n):
            xi = x[i]
            if kind[i] == 0:
                deg = 0
                mx = -INFINITY
                for j in range(n):
                    if adj[a_t, i, j]:
                        s = fabs(x[j] - xi + chan[t, i, j])
                        lr = -s * theta
                        if stochastic:
                            rho[i, j] = lr
                        L[i, j] += lr
                        deg += 1
                        if L[i, j] > mx:
                            mx = L[i, j]
                    elif stochastic and j != i:
                        L[i, j] += rho[i, j]
                if deg == 0:
                    for j in range(n):
                        cur[i, j] = 0.0
                    xn[i] = xi + proc[t, i]
                    continue
                scale = gamma if stochastic else 1.0 - 1.0 / deg
                tot = 0.0
                for j in range(n):
                    if adj[a_t, i, j]:
                        w = exp(L[i, j] - mx)
                        cur[i, j] = w
                        tot += w
                    else:
                        cur[i, j] = 0.0
                acc = 0.0
                for j in range(n):
                    if adj[a_t, i, j]:
                        w = cur[i, j] / tot * scale
                        cur[i, j] = w
                        held[i, j] = w
                        acc += w * (x[j] - xi)
                xn[i] = xi + acc + proc[t, i]
            else:
                acc = 0.0
                for j in range(n):
                    if adj[a_t, i, j]:
                        w = a0[i, j]
                        cur[i, j] = w
                        held[i, j] = w
                        acc += w * (x[j] - xi)
                    else:
                        cur[i, j] = 0.0
                if kind[i] == 2 and coin[t, i] < p_normal[i]:
                    xn[i] = xi + acc + proc[t, i]
                else:
                    xn[i] = xi + fault[t, i]
        x[:] = xn
