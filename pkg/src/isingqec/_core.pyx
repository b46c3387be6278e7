# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: digital-annealer search and subset DP for matching.

Both functions mirror ``_pycore`` exactly, including the order in which
random numbers are drawn, so the two backends give identical results for the
same generators.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, ceil
from libc.stdint cimport int64_t, int32_t, uint8_t
from cpython.pycapsule cimport PyCapsule_GetPointer
from numpy.random cimport bitgen_t

cnp.import_array()

cdef const char *CAPSULE_NAME = "BitGenerator"


cdef inline double _uniform(bitgen_t *rng) noexcept nogil:
    return rng.next_double(rng.state)


cdef inline void _touch(int64_t j, int64_t r, uint8_t[:, ::1] x, int64_t[:, ::1] fld,
                        int32_t[:, ::1] active, int32_t[:, ::1] pos, int64_t[::1] n_active,
                        int64_t cutoff) noexcept nogil:
    cdef int64_t de = fld[r, j] if x[r, j] == 0 else -fld[r, j]
    cdef int64_t p = pos[r, j]
    cdef int64_t last
    if de <= cutoff:
        if p < 0:
            active[r, n_active[r]] = <int32_t>j
            pos[r, j] = <int32_t>n_active[r]
            n_active[r] += 1
    elif p >= 0:
        n_active[r] -= 1
        last = active[r, n_active[r]]
        active[r, p] = <int32_t>last
        pos[r, last] = <int32_t>p
        pos[r, j] = -1


def anneal(
    const int64_t[::1] indptr,
    const int64_t[::1] indices,
    const int64_t[::1] weights,
    const int64_t[::1] linear,
    int64_t constant,
    const int64_t[::1] cons_ptr,
    const int64_t[::1] cons_idx,
    const uint8_t[::1] cons_odd,
    double[::1] temps,
    const double[::1] schedule,
    int64_t sweeps,
    int64_t exchange_interval,
    int64_t stale_limit,
    bint exchange,
    list generators,
    bint record_trace,
):
    """Run the search; see ``_pycore.anneal`` for the contract."""
    cdef int64_t n = linear.shape[0]
    cdef int64_t R = temps.shape[0]
    cdef int64_t n_cons = cons_odd.shape[0]
    cdef double t_max = 0.0
    cdef int64_t k, r, i, j, a, s, s0, s1, K, q, c, de, cutoff, block
    cdef double u, delta
    for k in range(R):
        if temps[k] > t_max:
            t_max = temps[k]
    for k in range(schedule.shape[0]):
        if schedule[k] > t_max:
            t_max = schedule[k]
    cutoff = <int64_t>ceil(40.0 * t_max)

    cdef bitgen_t **rngs = NULL
    cdef list capsules = [g.bit_generator.capsule for g in generators]
    cdef cnp.ndarray[cnp.intp_t] rng_ptrs = np.empty(len(capsules), dtype=np.intp)
    for k in range(len(capsules)):
        rng_ptrs[k] = <cnp.intp_t>PyCapsule_GetPointer(capsules[k], CAPSULE_NAME)
    cdef bitgen_t *rng
    cdef bitgen_t *xrng = <bitgen_t *>rng_ptrs[R]

    x_arr = np.zeros((R, n), dtype=np.uint8)
    fld_arr = np.empty((R, n), dtype=np.int64)
    par_arr = np.zeros((R, max(n_cons, 1)), dtype=np.uint8)
    active_arr = np.empty((R, max(n, 1)), dtype=np.int32)
    pos_arr = np.full((R, max(n, 1)), -1, dtype=np.int32)
    acc_arr = np.empty(max(n, 1), dtype=np.int64)
    cdef uint8_t[:, ::1] x = x_arr
    cdef int64_t[:, ::1] fld = fld_arr
    cdef uint8_t[:, ::1] par = par_arr
    cdef int32_t[:, ::1] active = active_arr
    cdef int32_t[:, ::1] pos = pos_arr
    cdef int64_t[::1] acc = acc_arr
    cdef int64_t[::1] n_active = np.zeros(R, dtype=np.int64)
    cdef int64_t[::1] energy = np.full(R, constant, dtype=np.int64)
    cdef int64_t[::1] violated = np.zeros(R, dtype=np.int64)
    cdef int64_t[::1] slot_of = np.arange(R, dtype=np.int64)
    cdef int64_t[::1] rep_at = np.arange(R, dtype=np.int64)
    table_arr = np.zeros((R, cutoff + 1), dtype=np.float64)
    cdef double[:, ::1] table = table_arr
    trace_arr = np.zeros((sweeps if record_trace else 0, R), dtype=np.int64)
    cdef int64_t[:, ::1] trace = trace_arr
    best_x_arr = np.zeros(n, dtype=np.uint8)
    cdef uint8_t[::1] best_x = best_x_arr
    cdef bint have_best = False
    cdef int64_t best_e = 0, best_s = 0, best_r = 0
    cdef int64_t n_odd = 0
    cdef bint use_schedule = schedule.shape[0] > 0

    for c in range(n_cons):
        n_odd += cons_odd[c]
    for k in range(R):
        for de in range(1, cutoff + 1):
            table[k, de] = exp(-de / temps[k])
    for r in range(R):
        violated[r] = n_odd
        for i in range(n):
            fld[r, i] = linear[i]
        for i in range(n):
            _touch(i, r, x, fld, active, pos, n_active, cutoff)
    if n_odd == 0:
        have_best = True
        best_e = constant
        best_s = 0
        best_r = 0

    block = exchange_interval if exchange else 1
    if block < 1:
        block = 1
    s0 = 0
    while s0 < sweeps:
        s1 = s0 + block
        if s1 > sweeps:
            s1 = sweeps
        for r in range(R):
            rng = <bitgen_t *>rng_ptrs[r]
            for s in range(s0, s1):
                if use_schedule:
                    for de in range(1, cutoff + 1):
                        table[slot_of[r], de] = exp(-de / schedule[s])
                K = 0
                for a in range(n_active[r]):
                    i = active[r, a]
                    de = fld[r, i] if x[r, i] == 0 else -fld[r, i]
                    if de <= 0:
                        acc[K] = i
                        K += 1
                    else:
                        u = _uniform(rng)
                        if u < table[slot_of[r], de]:
                            acc[K] = i
                            K += 1
                if K > 0:
                    u = _uniform(rng)
                    i = acc[<int64_t>(u * K)]
                    de = fld[r, i] if x[r, i] == 0 else -fld[r, i]
                    energy[r] += de
                    if x[r, i] == 0:
                        x[r, i] = 1
                        q = 1
                    else:
                        x[r, i] = 0
                        q = -1
                    _touch(i, r, x, fld, active, pos, n_active, cutoff)
                    for a in range(indptr[i], indptr[i + 1]):
                        j = indices[a]
                        fld[r, j] += q * weights[a]
                        _touch(j, r, x, fld, active, pos, n_active, cutoff)
                    for a in range(cons_ptr[i], cons_ptr[i + 1]):
                        c = cons_idx[a]
                        par[r, c] ^= 1
                        if par[r, c] == cons_odd[c]:
                            violated[r] -= 1
                        else:
                            violated[r] += 1
                if record_trace:
                    trace[s, r] = energy[r]
                if violated[r] == 0:
                    if (not have_best or energy[r] < best_e
                            or (energy[r] == best_e and (s + 1 < best_s
                                                          or (s + 1 == best_s and r < best_r)))):
                        have_best = True
                        best_e = energy[r]
                        best_s = s + 1
                        best_r = r
                        for i in range(n):
                            best_x[i] = x[r, i]
        s0 = s1
        if exchange and s1 % exchange_interval == 0:
            for k in range(R - 1):
                a = rep_at[k]
                j = rep_at[k + 1]
                delta = (1.0 / temps[k] - 1.0 / temps[k + 1]) * <double>(energy[a] - energy[j])
                if delta < 0.0:
                    u = _uniform(xrng)
                    if not (u < exp(delta)):
                        continue
                rep_at[k] = j
                rep_at[k + 1] = a
                slot_of[j] = k
                slot_of[a] = k + 1
        if have_best and stale_limit > 0 and s1 - best_s >= stale_limit:
            break

    feasible = bool(have_best)
    if not have_best:
        r = 0
        for k in range(1, R):
            if energy[k] < energy[r]:
                r = k
        best_x_arr[:] = x_arr[r]
        best_e = energy[r]
        best_s = s0
    return best_x_arr, int(best_e), int(best_s), feasible, int(s0), trace_arr


def subset_dp(const int64_t[::1] boundary, const int64_t[:, ::1] dist):
    """Minimum matching cost for every subset of nodes (boundary pairing allowed)."""
    cdef int64_t n = boundary.shape[0]
    cdef int64_t size = (<int64_t>1) << n
    dp_arr = np.zeros(size, dtype=np.int64)
    cdef int64_t[::1] dp = dp_arr
    cdef int64_t mask, rest, i, j, best, cand
    for mask in range(1, size):
        i = 0
        while not (mask >> i) & 1:
            i += 1
        rest = mask ^ ((<int64_t>1) << i)
        best = dp[rest] + boundary[i]
        for j in range(i + 1, n):
            if (rest >> j) & 1:
                cand = dp[rest ^ ((<int64_t>1) << j)] + dist[i, j]
                if cand < best:
                    best = cand
        dp[mask] = best
    return dp_arr
