"""Rotation schedule shared by both kernel backends."""

import numpy as np


def round_robin(n: int) -> np.ndarray:
    """Tournament ordering of all index pairs for cyclic Jacobi.

    Returns an ``(rounds, n_pairs, 2)`` int64 array; every unordered pair
    ``(p, q)`` with ``p < q < n`` appears exactly once and the pairs inside a
    round are disjoint.  Padding slots hold ``-1``.
    """
    if n < 2:
        return np.zeros((0, 0, 2), dtype=np.int64)
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a >= n or b >= n:
                pairs.append((-1, -1))
            else:
                pairs.append((min(a, b), max(a, b)))
        rounds.append(pairs)
        players = [players[0], players[-1]] + players[1:-1]
    return np.asarray(rounds, dtype=np.int64)
