# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: cyclic Jacobi sweeps and BFS trees."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()


cdef double _offnorm(double[:, ::1] A, Py_ssize_t n) nogil:
    cdef double s = 0.0
    cdef Py_ssize_t i, j
    for i in range(n):
        for j in range(n):
            if i != j:
                s += A[i, j] * A[i, j]
    return sqrt(s)


def jacobi(double[:, ::1] A, double[:, ::1] Vt, const cnp.int64_t[:, :, ::1] rounds,
           double tol, int max_sweeps):
    """Cyclic Jacobi sweeps on the symmetric ``A`` in place.

    Rotations accumulate into the rows of ``Vt`` (eigenvectors as rows).
    Only rows ``p``/``q`` are read, so memory access stays contiguous; the
    mirrored columns are written to keep ``A`` exactly symmetric.
    """
    cdef Py_ssize_t n = A.shape[0]
    cdef Py_ssize_t nr = rounds.shape[0]
    cdef Py_ssize_t npairs = rounds.shape[1] if nr > 0 else 0
    cdef Py_ssize_t r, i, k, p, q
    cdef double scale = 0.0, target, apq, theta, t, c, s, sign, x, y
    cdef int sweep
    for i in range(n):
        for k in range(n):
            scale += A[i, k] * A[i, k]
    scale = sqrt(scale)
    if n < 2 or scale == 0.0:
        return 0, True
    target = tol * scale
    with nogil:
        for sweep in range(max_sweeps):
            if _offnorm(A, n) <= target:
                with gil:
                    return sweep, True
            for r in range(nr):
                for i in range(npairs):
                    p = rounds[r, i, 0]
                    q = rounds[r, i, 1]
                    if p < 0:
                        continue
                    apq = A[p, q]
                    if fabs(apq) <= 1e-300:
                        continue
                    theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                    sign = 1.0 if theta >= 0.0 else -1.0
                    t = sign / (fabs(theta) + sqrt(1.0 + theta * theta))
                    c = 1.0 / sqrt(1.0 + t * t)
                    s = t * c
                    for k in range(n):
                        if k == p or k == q:
                            continue
                        x = A[p, k]
                        y = A[q, k]
                        x, y = c * x - s * y, s * x + c * y
                        A[p, k] = x
                        A[q, k] = y
                        A[k, p] = x
                        A[k, q] = y
                    A[p, p] = A[p, p] - t * apq
                    A[q, q] = A[q, q] + t * apq
                    A[p, q] = 0.0
                    A[q, p] = 0.0
                    for k in range(n):
                        x = Vt[p, k]
                        y = Vt[q, k]
                        Vt[p, k] = c * x - s * y
                        Vt[q, k] = s * x + c * y
    return max_sweeps, bool(_offnorm(A, n) <= target)


def bfs_tree(Py_ssize_t n, const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] nbr,
             const cnp.int64_t[::1] nbr_edge, Py_ssize_t root):
    """Breadth-first tree from ``root``: ``(dist, parent_node, parent_edge, branch)``."""
    dist_a = np.full(n, -1, dtype=np.int64)
    parent_a = np.full(n, -1, dtype=np.int64)
    pedge_a = np.full(n, -1, dtype=np.int64)
    branch_a = np.full(n, -1, dtype=np.int64)
    queue_a = np.empty(max(n, 1), dtype=np.int64)
    cdef cnp.int64_t[::1] dist = dist_a
    cdef cnp.int64_t[::1] parent = parent_a
    cdef cnp.int64_t[::1] pedge = pedge_a
    cdef cnp.int64_t[::1] branch = branch_a
    cdef cnp.int64_t[::1] queue = queue_a
    cdef Py_ssize_t head = 0, tail = 0, u, v, k
    dist[root] = 0
    queue[tail] = root
    tail += 1
    with nogil:
        while head < tail:
            u = queue[head]
            head += 1
            for k in range(indptr[u], indptr[u + 1]):
                v = nbr[k]
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    parent[v] = u
                    pedge[v] = nbr_edge[k]
                    branch[v] = v if u == root else branch[u]
                    queue[tail] = v
                    tail += 1
    return dist_a, parent_a, pedge_a, branch_a
