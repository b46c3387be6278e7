"""Pure-Python kernels, used when the compiled ``_core`` is unavailable.

Behaviour matches ``_core`` draw for draw: the same generators produce the same
trajectories.
"""

from __future__ import annotations

import math

import numpy as np


def anneal(indptr, indices, weights, linear, constant, cons_ptr, cons_idx, cons_odd,
           temps, schedule, sweeps, exchange_interval, stale_limit, exchange,
           generators, record_trace):
    """Digital-annealer search over ``len(temps)`` replicas.

    Each sweep a replica computes ``dE`` for every variable, accepts those with
    ``dE <= 0`` or ``u < exp(-dE/T)``, and flips one accepted variable chosen
    uniformly.  Variables with ``dE > ceil(40 * T_max)`` are never accepted
    (probability below ``e^-40``) and are skipped without drawing.

    Replicas advance ``exchange_interval`` sweeps at a time; after each block
    adjacent temperature slots try to swap.  The best feasible state (all
    constraint parities met) is kept with ties going to the earliest sweep,
    then the lowest replica.  Returns ``(x, energy, sweep_of_best, feasible,
    sweeps_used, trace)``.
    """
    n = len(linear)
    R = len(temps)
    linear = [int(v) for v in linear]
    indptr = [int(v) for v in indptr]
    indices = [int(v) for v in indices]
    weights = [int(v) for v in weights]
    cons_ptr = [int(v) for v in cons_ptr]
    cons_idx = [int(v) for v in cons_idx]
    cons_odd = [int(v) for v in cons_odd]
    temps = [float(t) for t in temps]
    schedule = [float(t) for t in schedule]
    t_max = max(temps + schedule)
    cutoff = int(math.ceil(40.0 * t_max))

    x = [[0] * n for _ in range(R)]
    fld = [list(linear) for _ in range(R)]
    par = [[0] * len(cons_odd) for _ in range(R)]
    active = [[] for _ in range(R)]
    pos = [[-1] * n for _ in range(R)]
    n_odd = sum(cons_odd)
    energy = [int(constant)] * R
    violated = [n_odd] * R
    slot_of = list(range(R))
    rep_at = list(range(R))
    table = [[0.0] + [math.exp(-de / temps[k]) for de in range(1, cutoff + 1)] for k in range(R)]
    trace = np.zeros((sweeps if record_trace else 0, R), dtype=np.int64)

    def touch(j, r):
        xr, fr, ar, pr = x[r], fld[r], active[r], pos[r]
        de = fr[j] if xr[j] == 0 else -fr[j]
        p = pr[j]
        if de <= cutoff:
            if p < 0:
                pr[j] = len(ar)
                ar.append(j)
        elif p >= 0:
            last = ar.pop()
            if last != j:
                ar[p] = last
                pr[last] = p
            pr[j] = -1

    for r in range(R):
        for i in range(n):
            touch(i, r)
    have_best = n_odd == 0
    best_e, best_s, best_r = int(constant), 0, 0
    best_x = np.zeros(n, dtype=np.uint8)
    block = max(exchange_interval if exchange else 1, 1)
    s0 = 0
    while s0 < sweeps:
        s1 = min(s0 + block, sweeps)
        for r in range(R):
            rand = generators[r].random
            xr, fr = x[r], fld[r]
            for s in range(s0, s1):
                if schedule:
                    table[slot_of[r]] = [0.0] + [math.exp(-de / schedule[s]) for de in range(1, cutoff + 1)]
                tab = table[slot_of[r]]
                acc = []
                for i in active[r]:
                    de = fr[i] if xr[i] == 0 else -fr[i]
                    if de <= 0 or rand() < tab[de]:
                        acc.append(i)
                if acc:
                    i = acc[int(rand() * len(acc))]
                    de = fr[i] if xr[i] == 0 else -fr[i]
                    energy[r] += de
                    q = 1 if xr[i] == 0 else -1
                    xr[i] ^= 1
                    touch(i, r)
                    for a in range(indptr[i], indptr[i + 1]):
                        j = indices[a]
                        fr[j] += q * weights[a]
                        touch(j, r)
                    pr = par[r]
                    for a in range(cons_ptr[i], cons_ptr[i + 1]):
                        c = cons_idx[a]
                        pr[c] ^= 1
                        violated[r] += -1 if pr[c] == cons_odd[c] else 1
                if record_trace:
                    trace[s, r] = energy[r]
                if violated[r] == 0:
                    e = energy[r]
                    if (not have_best or e < best_e
                            or (e == best_e and (s + 1 < best_s or (s + 1 == best_s and r < best_r)))):
                        have_best = True
                        best_e, best_s, best_r = e, s + 1, r
                        best_x[:] = xr
        s0 = s1
        if exchange and s1 % exchange_interval == 0:
            xrand = generators[R].random
            for k in range(R - 1):
                a, j = rep_at[k], rep_at[k + 1]
                delta = (1.0 / temps[k] - 1.0 / temps[k + 1]) * float(energy[a] - energy[j])
                if delta < 0.0 and not (xrand() < math.exp(delta)):
                    continue
                rep_at[k], rep_at[k + 1] = j, a
                slot_of[j], slot_of[a] = k, k + 1
        if have_best and stale_limit > 0 and s1 - best_s >= stale_limit:
            break

    if not have_best:
        r = min(range(R), key=lambda k: (energy[k], k))
        best_x[:] = x[r]
        best_e, best_s = energy[r], s0
    return best_x, int(best_e), int(best_s), bool(have_best), int(s0), trace


def subset_dp(boundary, dist):
    """Minimum matching cost of every node subset, vectorised by lowest node.

    Subsets whose lowest node is ``i`` only depend on subsets of the nodes
    above ``i``, so nodes are processed from the highest down.
    """
    boundary = np.asarray(boundary, dtype=np.int64)
    dist = np.asarray(dist, dtype=np.int64)
    n = len(boundary)
    dp = np.zeros(1 << n, dtype=np.int64)
    for i in range(n - 1, -1, -1):
        # subsets of nodes i+1..n-1, as masks
        high = np.arange(1 << (n - i - 1), dtype=np.int64) << (i + 1)
        best = dp[high] + boundary[i]
        for j in range(i + 1, n):
            bit = 1 << j
            has = (high & bit) != 0
            cand = np.where(has, dp[high ^ bit] + dist[i, j], np.iinfo(np.int64).max)
            best = np.minimum(best, cand)
        dp[high | (1 << i)] = best
    return dp
