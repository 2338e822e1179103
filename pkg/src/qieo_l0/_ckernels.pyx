# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled population kernels; twin of ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t, uint8_t
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double INV53 = 1.0 / 9007199254740992.0


cdef inline uint64_t fmix(uint64_t z) nogil:
    z = z ^ (z >> 30)
    z = z * 0xBF58476D1CE4E5B9ULL
    z = z ^ (z >> 27)
    z = z * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t stream_key(uint64_t seed, int64_t stream) nogil:
    return fmix(seed ^ fmix(<uint64_t>stream + GOLDEN))


cdef inline uint64_t draw53(uint64_t key, int64_t ctr) nogil:
    return fmix(key + <uint64_t>(ctr + 1) * GOLDEN) >> 11


ctypedef struct keyed:
    uint64_t key
    int64_t idx


cdef inline bint less(keyed* x, keyed* y) noexcept nogil:
    return x.key < y.key or (x.key == y.key and x.idx < y.idx)


cdef void select_smallest(keyed* a, Py_ssize_t n, Py_ssize_t r) noexcept nogil:
    # Partition so a[0:r] holds the r smallest entries (in any order).
    cdef Py_ssize_t lo = 0, hi = n - 1, i, j, mid
    cdef keyed pivot, tmp
    if r <= 0 or r >= n:
        return
    while hi > lo:
        mid = lo + (hi - lo) // 2
        pivot = a[mid]
        i = lo
        j = hi
        while i <= j:
            while less(&a[i], &pivot):
                i += 1
            while less(&pivot, &a[j]):
                j -= 1
            if i <= j:
                tmp = a[i]
                a[i] = a[j]
                a[j] = tmp
                i += 1
                j -= 1
        if r - 1 <= j:
            hi = j
        elif r - 1 >= i:
            lo = i
        else:
            return


def raw_draws(seed, streams, Py_ssize_t offset, Py_ssize_t count):
    cdef int64_t[::1] s = np.ascontiguousarray(streams, dtype=np.int64)
    cdef Py_ssize_t n = s.shape[0], i, j
    out = np.empty((n, count), dtype=np.uint64)
    cdef uint64_t[:, ::1] o = out
    cdef uint64_t sd = (<uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF))
    cdef uint64_t key
    with nogil:
        for i in range(n):
            key = stream_key(sd, s[i])
            for j in range(count):
                o[i, j] = draw53(key, offset + j)
    return out


def uniform(seed, streams, Py_ssize_t offset, Py_ssize_t count):
    return raw_draws(seed, streams, offset, count).astype(np.float64) * INV53


def measure(probs, seed, int64_t stream_base):
    cdef const double[:, ::1] p = np.ascontiguousarray(probs, dtype=np.float64)
    cdef Py_ssize_t pop = p.shape[0], m = p.shape[1], i, j
    out = np.empty((pop, m), dtype=np.uint8)
    cdef uint8_t[:, ::1] o = out
    cdef uint64_t sd = (<uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF))
    cdef uint64_t key
    cdef double u
    with nogil:
        for i in range(pop):
            key = stream_key(sd, stream_base + i)
            for j in range(m):
                u = <double>draw53(key, j) * INV53
                o[i, j] = 1 if u < p[i, j] else 0
    return out


def repair(bits, Py_ssize_t budget, seed, int64_t stream_base, Py_ssize_t offset):
    out = np.array(bits, dtype=np.uint8, order="C", copy=True)
    cdef uint8_t[:, ::1] b = out
    cdef Py_ssize_t pop = b.shape[0], m = b.shape[1], i, j, c, nc, need
    cdef uint64_t sd = (<uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF))
    cdef uint64_t key
    cdef uint8_t target
    cdef keyed* buf = <keyed*>malloc(max(m, 1) * sizeof(keyed))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(pop):
                c = 0
                for j in range(m):
                    c += b[i, j]
                if c == budget:
                    continue
                key = stream_key(sd, stream_base + i)
                # drop: rank the ones and keep `budget`; add: rank the zeros
                # and set `budget - c` of them.
                target = 1 if c > budget else 0
                nc = 0
                for j in range(m):
                    if b[i, j] == target:
                        buf[nc].key = draw53(key, offset + j)
                        buf[nc].idx = j
                        nc += 1
                if target == 1:
                    select_smallest(buf, nc, budget)
                    for j in range(budget, nc):
                        b[i, buf[j].idx] = 0
                else:
                    need = budget - c
                    select_smallest(buf, nc, need)
                    for j in range(need):
                        b[i, buf[j].idx] = 1
    finally:
        free(buf)
    return out


def rotate(angles, observed, best, double half_delta, double lo, double hi):
    cdef const double[:, ::1] a = np.ascontiguousarray(angles, dtype=np.float64)
    cdef const uint8_t[:, ::1] ob = np.ascontiguousarray(observed, dtype=np.uint8)
    cdef const uint8_t[::1] bs = np.ascontiguousarray(best, dtype=np.uint8)
    cdef Py_ssize_t pop = a.shape[0], m = a.shape[1], i, j
    out = np.empty((pop, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double v
    with nogil:
        for i in range(pop):
            for j in range(m):
                if ob[i, j] == bs[j]:
                    o[i, j] = a[i, j]
                    continue
                if bs[j]:
                    v = a[i, j] + half_delta
                else:
                    v = a[i, j] + (-half_delta)
                if v < lo:
                    v = lo
                if v > hi:
                    v = hi
                o[i, j] = v
    return out
