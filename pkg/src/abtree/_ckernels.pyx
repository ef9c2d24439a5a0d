# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sampling kernels. Same contract as ``abtree._pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t, int32_t
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double INV_2_53 = 1.0 / 9007199254740992.0

OK = 0
BUDGET_EXCEEDED = 1


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t stream_state(uint64_t seed, uint64_t stream) noexcept nogil:
    return mix64(mix64(seed) + stream)


cdef inline Py_ssize_t pick(uint64_t* state, const double* cum, Py_ssize_t lo, Py_ssize_t hi) noexcept nogil:
    state[0] += GOLDEN
    cdef double u = <double>(mix64(state[0]) >> 11) * INV_2_53
    cdef Py_ssize_t k = lo
    while k < hi - 1 and u >= cum[k]:
        k += 1
    return k


def cover_trees(indptr, indices, cum, int n, int root, start_cum, seed, first_trial,
                Py_ssize_t count, long long budget, bint last_exit):
    cdef cnp.int64_t[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef cnp.int64_t[::1] idx = np.ascontiguousarray(indices, dtype=np.int64)
    cdef double[::1] cm = np.ascontiguousarray(cum, dtype=np.float64)
    cdef double[::1] sc = np.ascontiguousarray(start_cum, dtype=np.float64)
    cdef bint stationary = sc.shape[0] > 0
    parents_arr = np.full((count, n), -1, dtype=np.int32)
    roots_arr = np.zeros(count, dtype=np.int32)
    cdef int32_t[:, ::1] parents = parents_arr
    cdef int32_t[::1] roots = roots_arr
    cdef uint64_t useed = <uint64_t>(seed & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t ufirst = <uint64_t>(first_trial & 0xFFFFFFFFFFFFFFFF)
    cdef Py_ssize_t t, k
    cdef int v, w, start, nseen
    cdef long long steps
    cdef uint64_t state
    cdef int status = 0
    cdef char* seen = <char*>malloc(n)
    if seen == NULL:
        raise MemoryError()
    cdef const double* cmp = &cm[0]
    cdef const double* scp = &sc[0] if stationary else NULL
    try:
        with nogil:
            for t in range(count):
                state = stream_state(useed, ufirst + <uint64_t>t)
                if stationary:
                    v = <int>pick(&state, scp, 0, n)
                else:
                    v = root
                start = v
                for k in range(n):
                    seen[k] = 0
                seen[v] = 1
                nseen = 1
                steps = 0
                while nseen < n:
                    if steps >= budget:
                        status = 1
                        break
                    k = pick(&state, cmp, ip[v], ip[v + 1])
                    w = <int>idx[k]
                    steps += 1
                    if last_exit:
                        parents[t, v] = w
                        parents[t, w] = -1
                    elif not seen[w]:
                        parents[t, w] = v
                    if not seen[w]:
                        seen[w] = 1
                        nseen += 1
                    v = w
                if status:
                    break
                roots[t] = v if last_exit else start
    finally:
        free(seen)
    return parents_arr, roots_arr, status


def wilson_trees(indptr, indices, cum, int n, int root, seed, first_trial,
                 Py_ssize_t count, long long budget):
    cdef cnp.int64_t[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef cnp.int64_t[::1] idx = np.ascontiguousarray(indices, dtype=np.int64)
    cdef double[::1] cm = np.ascontiguousarray(cum, dtype=np.float64)
    parents_arr = np.full((count, n), -1, dtype=np.int32)
    cdef int32_t[:, ::1] parents = parents_arr
    cdef uint64_t useed = <uint64_t>(seed & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t ufirst = <uint64_t>(first_trial & 0xFFFFFFFFFFFFFFFF)
    cdef Py_ssize_t t, k
    cdef int i, u
    cdef long long steps
    cdef uint64_t state
    cdef int status = 0
    cdef char* in_tree = <char*>malloc(n)
    if in_tree == NULL:
        raise MemoryError()
    cdef const double* cmp = &cm[0]
    try:
        with nogil:
            for t in range(count):
                state = stream_state(useed, ufirst + <uint64_t>t)
                for k in range(n):
                    in_tree[k] = 0
                in_tree[root] = 1
                steps = 0
                for i in range(n):
                    u = i
                    while not in_tree[u]:
                        if steps >= budget:
                            status = 1
                            break
                        k = pick(&state, cmp, ip[u], ip[u + 1])
                        parents[t, u] = <int32_t>idx[k]
                        u = parents[t, u]
                        steps += 1
                    if status:
                        break
                    u = i
                    while not in_tree[u]:
                        in_tree[u] = 1
                        u = parents[t, u]
                if status:
                    break
                parents[t, root] = -1
    finally:
        free(in_tree)
    return parents_arr, status


def tree_chain_codes(indptr, indices, cum, int n, parent0, int root0, seed, stream,
                     Py_ssize_t steps):
    cdef cnp.int64_t[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef cnp.int64_t[::1] idx = np.ascontiguousarray(indices, dtype=np.int64)
    cdef double[::1] cm = np.ascontiguousarray(cum, dtype=np.float64)
    cdef cnp.int64_t[::1] parent = np.array(parent0, dtype=np.int64)
    codes_arr = np.zeros(steps, dtype=np.int64)
    cdef int64_t[::1] codes = codes_arr
    cdef uint64_t state = stream_state(<uint64_t>(seed & 0xFFFFFFFFFFFFFFFF),
                                       <uint64_t>(stream & 0xFFFFFFFFFFFFFFFF))
    cdef int r = root0
    cdef int r2, v
    cdef Py_ssize_t s, k
    cdef int64_t code
    cdef int64_t base = n + 1
    cdef const double* cmp = &cm[0]
    with nogil:
        for s in range(steps):
            k = pick(&state, cmp, ip[r], ip[r + 1])
            r2 = <int>idx[k]
            parent[r] = r2
            parent[r2] = -1
            r = r2
            code = r
            for v in range(n):
                code = code * base + parent[v] + 1
            codes[s] = code
    return codes_arr
