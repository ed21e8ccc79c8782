# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled SIC kernel; same contract as ``satlink._sic_py.decode_blocks``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def decode_blocks(slots, offsets, Py_ssize_t n_slots, credit, int required, int max_iterations):
    cdef cnp.int32_t[:, ::1] sl = np.ascontiguousarray(slots, dtype=np.int32)
    cdef cnp.int64_t[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef cnp.int32_t[::1] cr = np.ascontiguousarray(credit, dtype=np.int32)
    cdef Py_ssize_t n_packets = sl.shape[0]
    cdef Py_ssize_t n_b = sl.shape[1]
    cdef Py_ssize_t n_blocks = off.shape[0] - 1
    cdef Py_ssize_t n_credit = cr.shape[0]

    decoded_arr = np.zeros(n_packets, dtype=np.uint8)
    iterations_arr = np.zeros(n_blocks, dtype=np.int32)
    cdef cnp.uint8_t[::1] dec = decoded_arr
    cdef cnp.int32_t[::1] its = iterations_arr
    cdef cnp.int32_t[::1] count = np.zeros(n_slots, dtype=np.int32)
    cdef cnp.int64_t[::1] pending = np.zeros(max(n_packets, 1), dtype=np.int64)
    cdef cnp.int64_t[::1] ready = np.zeros(max(n_packets, 1), dtype=np.int64)

    cdef Py_ssize_t b, lo, hi, p, j, k, n_pending, n_ready, n_rest
    cdef int rounds, total, m

    for b in range(n_blocks):
        lo = off[b]
        hi = off[b + 1]
        for p in range(lo, hi):
            for j in range(n_b):
                count[sl[p, j]] += 1
        n_pending = 0
        for p in range(lo, hi):
            pending[n_pending] = p
            n_pending += 1
        rounds = 0
        while n_pending > 0 and (max_iterations <= 0 or rounds < max_iterations):
            n_ready = 0
            n_rest = 0
            for k in range(n_pending):
                p = pending[k]
                total = 0
                for j in range(n_b):
                    m = count[sl[p, j]]
                    if m <= n_credit:
                        total += cr[m - 1]
                if total >= required:
                    ready[n_ready] = p
                    n_ready += 1
                else:
                    pending[n_rest] = p
                    n_rest += 1
            if n_ready == 0:
                break
            rounds += 1
            for k in range(n_ready):
                p = ready[k]
                dec[p] = 1
                for j in range(n_b):
                    count[sl[p, j]] -= 1
            n_pending = n_rest
        its[b] = rounds
        # leave the counter clean for the next block
        for k in range(n_pending):
            p = pending[k]
            for j in range(n_b):
                count[sl[p, j]] -= 1
    return decoded_arr, iterations_arr
