# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Philox4x64-10 stream and inverse-CDF draw.

Must stay bit-identical to ``_kernels_py``; tests compare the two.
"""
import numpy as np

from libc.stdint cimport int64_t, uint64_t

cdef extern from *:
    """
    #include <stdint.h>
    static inline uint64_t clln_mulhilo(uint64_t a, uint64_t b, uint64_t *hi) {
        unsigned __int128 p = (unsigned __int128)a * (unsigned __int128)b;
        *hi = (uint64_t)(p >> 64);
        return (uint64_t)p;
    }
    """
    uint64_t clln_mulhilo(uint64_t a, uint64_t b, uint64_t *hi) nogil

cdef uint64_t M0 = 0xD2E7470EE14C6C93ULL
cdef uint64_t M1 = 0xCA5A826395121157ULL
cdef uint64_t W0 = 0x9E3779B97F4A7C15ULL
cdef uint64_t W1 = 0xBB67AE8584CAA73BULL
cdef double TWO_M53 = 1.0 / 9007199254740992.0

BACKEND = "compiled"


cdef inline void philox(uint64_t *c, uint64_t k0, uint64_t k1) noexcept nogil:
    cdef uint64_t hi0, hi1, lo0, lo1
    cdef int r
    for r in range(10):
        if r:
            k0 += W0
            k1 += W1
        lo0 = clln_mulhilo(M0, c[0], &hi0)
        lo1 = clln_mulhilo(M1, c[2], &hi1)
        c[0] = hi1 ^ c[1] ^ k0
        c[1] = lo1
        c[2] = hi0 ^ c[3] ^ k1
        c[3] = lo0


def philox4x64(counter, key):
    """One Philox4x64-10 block as a list of four ints."""
    cdef uint64_t c[4]
    for i in range(4):
        c[i] = <uint64_t>(int(counter[i]) & 0xFFFFFFFFFFFFFFFF)
    philox(c, <uint64_t>(int(key[0]) & 0xFFFFFFFFFFFFFFFF),
           <uint64_t>(int(key[1]) & 0xFFFFFFFFFFFFFFFF))
    return [int(c[0]), int(c[1]), int(c[2]), int(c[3])]


def philox_raw(seed, int64_t trial0, int64_t count, int64_t step):
    """First output word of the block with counter ``(trial, step, 0, 0)``, key ``(seed, 0)``."""
    cdef uint64_t k0 = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    out = np.empty(count, dtype=np.uint64)
    cdef uint64_t[::1] o = out
    cdef uint64_t c[4]
    cdef int64_t t
    with nogil:
        for t in range(count):
            c[0] = <uint64_t>(trial0 + t)
            c[1] = <uint64_t>step
            c[2] = 0
            c[3] = 0
            philox(c, k0, 0)
            o[t] = c[0]
    return out


def uniforms(seed, int64_t trial0, int64_t count, int64_t step):
    cdef uint64_t k0 = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    out = np.empty(count, dtype=np.float64)
    cdef double[::1] o = out
    cdef uint64_t c[4]
    cdef int64_t t
    with nogil:
        for t in range(count):
            c[0] = <uint64_t>(trial0 + t)
            c[1] = <uint64_t>step
            c[2] = 0
            c[3] = 0
            philox(c, k0, 0)
            o[t] = <double>(c[0] >> 11) * TWO_M53
    return out


def draw_step(seed, int64_t trial0, int64_t count, int64_t step, cdf, pick=None):
    """Category index per trial: number of ``cdf[row, :-1]`` entries <= u."""
    cdef double[:, ::1] C = np.ascontiguousarray(cdf, dtype=np.float64)
    cdef int64_t k = C.shape[1]
    cdef int64_t rows = C.shape[0]
    cdef bint has_pick = pick is not None
    cdef int64_t[::1] P
    if has_pick:
        P = np.ascontiguousarray(pick, dtype=np.int64)
        if P.shape[0] != count:
            raise ValueError("pick must have one entry per trial")
    elif rows != 1:
        raise ValueError("several candidate rows need a pick array")
    cdef uint64_t k0 = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    out = np.empty(count, dtype=np.int64)
    cdef int64_t[::1] o = out
    cdef uint64_t c[4]
    cdef int64_t t, j, row, idx
    cdef double u
    with nogil:
        for t in range(count):
            c[0] = <uint64_t>(trial0 + t)
            c[1] = <uint64_t>step
            c[2] = 0
            c[3] = 0
            philox(c, k0, 0)
            u = <double>(c[0] >> 11) * TWO_M53
            row = P[t] if has_pick else 0
            idx = 0
            for j in range(k - 1):
                if C[row, j] <= u:
                    idx += 1
            o[t] = idx
    return out
