"""Pure numpy implementations of the hot kernels.

Numerically the same algorithms as the compiled ``_core`` module: the
Jacobi rounds apply their disjoint rotations simultaneously instead of one
after another, which only changes floating-point summation order.
"""

from collections import deque

import numpy as np


def _offnorm(A):
    off = A - np.diag(np.diag(A))
    return np.sqrt(np.sum(off * off))


def jacobi(A, Vt, rounds, tol, max_sweeps):
    """Cyclic Jacobi sweeps on the symmetric matrix ``A`` (modified in place).

    Rotations accumulate into the rows of ``Vt``.  Returns
    ``(sweeps, converged)``; convergence means the off-diagonal Frobenius
    norm fell to ``tol * ||A||_F``.
    """
    n = A.shape[0]
    scale = np.sqrt(np.sum(A * A))
    if n < 2 or scale == 0.0:
        return 0, True
    target = tol * scale
    for sweep in range(max_sweeps):
        off = _offnorm(A)
        if off <= target:
            return sweep, True
        for rnd in rounds:
            keep = rnd[:, 0] >= 0
            P = rnd[keep, 0]
            Q = rnd[keep, 1]
            apq = A[P, Q]
            active = np.abs(apq) > 1e-300
            if not active.any():
                continue
            P, Q, apq = P[active], Q[active], apq[active]
            theta = (A[Q, Q] - A[P, P]) / (2.0 * apq)
            sign = np.where(theta >= 0.0, 1.0, -1.0)
            with np.errstate(over="ignore"):
                t = sign / (np.abs(theta) + np.sqrt(1.0 + theta * theta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            app = A[P, P] - t * apq
            aqq = A[Q, Q] + t * apq
            # two-sided update: entries shared by two pairs need both rotations
            AP, AQ = A[:, P].copy(), A[:, Q].copy()
            A[:, P] = AP * c - AQ * s
            A[:, Q] = AP * s + AQ * c
            c, s = c[:, None], s[:, None]
            AP, AQ = A[P, :].copy(), A[Q, :].copy()
            A[P, :] = c * AP - s * AQ
            A[Q, :] = s * AP + c * AQ
            A[P, P] = app
            A[Q, Q] = aqq
            A[P, Q] = 0.0
            A[Q, P] = 0.0
            VP, VQ = Vt[P, :].copy(), Vt[Q, :].copy()
            Vt[P, :] = c * VP - s * VQ
            Vt[Q, :] = s * VP + c * VQ
    off = _offnorm(A)
    return max_sweeps, bool(off <= target)


def bfs_tree(n, indptr, nbr, nbr_edge, root):
    """Breadth-first tree from ``root`` over a CSR adjacency.

    Returns ``(dist, parent_node, parent_edge, branch)``; ``branch[v]`` is the
    child of the root whose subtree contains ``v`` (``-1`` for the root and
    for unreachable nodes).
    """
    dist = np.full(n, -1, dtype=np.int64)
    parent = np.full(n, -1, dtype=np.int64)
    pedge = np.full(n, -1, dtype=np.int64)
    branch = np.full(n, -1, dtype=np.int64)
    dist[root] = 0
    queue = deque([root])
    while queue:
        u = queue.popleft()
        du = dist[u]
        for k in range(indptr[u], indptr[u + 1]):
            v = nbr[k]
            if dist[v] < 0:
                dist[v] = du + 1
                parent[v] = u
                pedge[v] = nbr_edge[k]
                branch[v] = v if u == root else branch[u]
                queue.append(v)
    return dist, parent, pedge, branch
