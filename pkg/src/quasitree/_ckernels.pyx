# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the loops in ``_pykernels``.

Do not build with -ffast-math: the clause tests depend on NaN comparing false.
"""
import numpy as np

from libc.math cimport INFINITY


def modified_table(dpi_in, double xi):
    cdef const double[:, :, ::1] dpi = np.ascontiguousarray(dpi_in, dtype=np.float64)
    cdef Py_ssize_t n = dpi.shape[0]
    out_arr = np.full((n, n, n), np.nan)
    cdef double[:, :, ::1] out = out_arr
    mem_a_arr = np.empty(n * n, dtype=np.intp)
    mem_b_arr = np.empty(n * n, dtype=np.intp)
    cdef Py_ssize_t[::1] mem_a = mem_a_arr
    cdef Py_ssize_t[::1] mem_b = mem_b_arr
    cdef double two = 2.0 * xi
    cdef double best, v
    cdef Py_ssize_t x, z, a, b, y, k, m
    for x in range(n):
        for z in range(n):
            if x == z:
                continue
            m = 0
            for a in range(n):
                for b in range(n):
                    if ((a == x and b == z)
                            or (dpi[x, a, b] > two and dpi[z, a, b] > two)
                            or (a == x and dpi[z, x, b] > two)
                            or (b == z and dpi[x, a, z] > two)):
                        mem_a[m] = a
                        mem_b[m] = b
                        m += 1
            for y in range(n):
                if y == x or y == z:
                    continue
                best = INFINITY
                for k in range(m):
                    a = mem_a[k]
                    b = mem_b[k]
                    if a == y or b == y:
                        continue
                    v = dpi[y, a, b]
                    if v < best:
                        best = v
                out[y, x, z] = best
    for y in range(n):
        for x in range(n):
            if x != y:
                out[y, x, x] = dpi[y, x, x]
    return out_arr


def monotonicity_violations(d_in, double theta):
    cdef const double[:, :, ::1] d = np.ascontiguousarray(d_in, dtype=np.float64)
    cdef Py_ssize_t n = d.shape[0]
    cdef Py_ssize_t x, y, z, w
    cdef long long checked = 0, violations = 0
    cdef double ref
    example = None
    for x in range(n):
        for z in range(n):
            if z == x:
                continue
            for y in range(n):
                if y == x or y == z or not (d[y, x, z] >= theta):
                    continue
                for w in range(n):
                    if w == x or w == y or w == z:
                        continue
                    checked += 1
                    ref = d[w, x, z]
                    if d[w, x, y] > ref or d[w, z, y] > ref:
                        violations += 1
                        if example is None:
                            example = (int(x), int(y), int(z), int(w))
    return int(checked), int(violations), example


def bfs_all_pairs(indptr_in, indices_in, Py_ssize_t n):
    cdef const long long[::1] indptr = np.ascontiguousarray(indptr_in, dtype=np.int64)
    cdef const long long[::1] indices = np.ascontiguousarray(indices_in, dtype=np.int64)
    dist_arr = np.full((n, n), -1, dtype=np.int64)
    cdef long long[:, ::1] dist = dist_arr
    queue_arr = np.empty(max(n, 1), dtype=np.int64)
    cdef long long[::1] queue = queue_arr
    cdef Py_ssize_t s, head, tail, u, v, e
    for s in range(n):
        dist[s, s] = 0
        queue[0] = s
        head = 0
        tail = 1
        while head < tail:
            u = queue[head]
            head += 1
            for e in range(indptr[u], indptr[u + 1]):
                v = indices[e]
                if dist[s, v] < 0:
                    dist[s, v] = dist[s, u] + 1
                    queue[tail] = v
                    tail += 1
    return dist_arr


def reachable(indptr_in, indices_in, blocked_in, Py_ssize_t src, Py_ssize_t dst):
    cdef const long long[::1] indptr = np.ascontiguousarray(indptr_in, dtype=np.int64)
    cdef const long long[::1] indices = np.ascontiguousarray(indices_in, dtype=np.int64)
    seen_arr = np.array(blocked_in, dtype=np.uint8)
    cdef unsigned char[::1] seen = seen_arr
    cdef Py_ssize_t n = seen.shape[0]
    if seen[src] or seen[dst]:
        return False
    if src == dst:
        return True
    queue_arr = np.empty(n, dtype=np.int64)
    cdef long long[::1] queue = queue_arr
    cdef Py_ssize_t head = 0, tail = 1, u, v, e
    queue[0] = src
    seen[src] = 1
    while head < tail:
        u = queue[head]
        head += 1
        for e in range(indptr[u], indptr[u + 1]):
            v = indices[e]
            if not seen[v]:
                if v == dst:
                    return True
                seen[v] = 1
                queue[tail] = v
                tail += 1
    return False
