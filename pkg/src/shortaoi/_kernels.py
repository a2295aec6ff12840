"""Compiled event loops, one per packet-management scheme.

Each kernel walks the arrival times ``gen`` and the per-attempt decode
uniforms ``u`` (an attempt fails when ``u < eps``) and records counted
deliveries into the preallocated output arrays.  A kernel that runs out
of random draws reports it through its status code; the caller extends the
streams and reruns from scratch, so results never depend on buffer sizes.
"""

import numpy as np
from numba import njit

OK = 0
NEED_ARRIVALS = 1
NEED_DECODES = 2

# counters layout: [service_starts, preemptions, attempts, discarded_arrivals]
N_COUNTERS = 4


@njit(cache=True)
def run_np(gen, u, eps, M, target, d_out, s_out, g_out, counters):
    n_gen = gen.shape[0]
    n_u = u.shape[0]
    i = 0
    k = 0
    n = 0
    need_first = True
    first = 0.0
    while n < target:
        if i >= n_gen:
            return NEED_ARRIVALS, n
        g = gen[i]
        i += 1
        if need_first:
            first = g
            need_first = False
        counters[0] += 1
        end = g + M
        while i < n_gen and gen[i] < end:
            i += 1
            counters[3] += 1
        if i >= n_gen:
            return NEED_ARRIVALS, n
        if k >= n_u:
            return NEED_DECODES, n
        counters[2] += 1
        ok = u[k] >= eps
        k += 1
        if ok:
            d_out[n] = end
            s_out[n] = g
            g_out[n] = first
            n += 1
            need_first = True
    return OK, n


@njit(cache=True)
def run_pr(gen, u, eps, M, target, d_out, s_out, g_out, counters):
    n_gen = gen.shape[0]
    n_u = u.shape[0]
    i = 0
    k = 0
    n = 0
    need_first = True
    first = 0.0
    while n < target:
        if i >= n_gen:
            return NEED_ARRIVALS, n
        g = gen[i]
        i += 1
        if need_first:
            first = g
            need_first = False
        counters[0] += 1
        while True:
            if i >= n_gen:
                return NEED_ARRIVALS, n
            if gen[i] < g + M:
                counters[1] += 1
                counters[0] += 1
                g = gen[i]
                i += 1
            else:
                break
        if k >= n_u:
            return NEED_DECODES, n
        counters[2] += 1
        ok = u[k] >= eps
        k += 1
        if ok:
            d_out[n] = g + M
            s_out[n] = g
            g_out[n] = first
            n += 1
            need_first = True
    return OK, n


@njit(cache=True)
def run_rt(gen, u, eps, M, target, d_out, s_out, g_out, counters):
    n_gen = gen.shape[0]
    n_u = u.shape[0]
    i = 0
    k = 0
    n = 0
    need_first = True
    first = 0.0
    while n < target:
        if i >= n_gen:
            return NEED_ARRIVALS, n
        g = gen[i]
        i += 1
        if need_first:
            first = g
            need_first = False
        counters[0] += 1
        if i >= n_gen:
            return NEED_ARRIVALS, n
        nxt = gen[i]
        j = 1
        delivered = False
        while g + j * M <= nxt:
            if k >= n_u:
                return NEED_DECODES, n
            counters[2] += 1
            ok = u[k] >= eps
            k += 1
            if ok:
                d_out[n] = g + j * M
                s_out[n] = g
                g_out[n] = first
                n += 1
                need_first = True
                delivered = True
                break
            j += 1
        if not delivered:
            counters[1] += 1
    return OK, n


@njit(cache=True)
def run_fcfs(gen, u, eps, M, target, d_out, s_out, g_out, counters):
    n_gen = gen.shape[0]
    n_u = u.shape[0]
    k = 0
    n = 0
    free = 0.0
    while n < target:
        if n >= n_gen:
            return NEED_ARRIVALS, n
        g = gen[n]
        start = g if g > free else free
        counters[0] += 1
        j = 1
        while True:
            if k >= n_u:
                return NEED_DECODES, n
            counters[2] += 1
            ok = u[k] >= eps
            k += 1
            if ok:
                break
            j += 1
        free = start + j * M
        d_out[n] = free
        s_out[n] = g
        g_out[n] = np.nan
        n += 1
    return OK, n
