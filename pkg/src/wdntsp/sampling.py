"""Greedy Max-Det sensor placement and band-limited interpolation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RecoveryError

EIG_FLOOR = 1e-10
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class SamplingSet:
    indices: tuple[int, ...]
    orientation: str = "node"
    basis_selected: tuple[int, ...] | None = None

    def __post_init__(self):
        idx = tuple(sorted(int(i) for i in self.indices))
        if not idx:
            raise ValueError("a sampling set needs at least one element")
        if len(set(idx)) != len(idx):
            raise ValueError("sampling indices must be unique")
        if idx[0] < 0:
            raise ValueError("sampling indices must be non-negative")
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return len(self.indices)

    def mask(self, n: int) -> np.ndarray:
        if self.indices[-1] >= n:
            raise IndexError(f"sampling index {self.indices[-1]} out of range for size {n}")
        m = np.zeros(n, dtype=bool)
        m[list(self.indices)] = True
        return m


def pseudo_det(rows: np.ndarray) -> float:
    """Product of the eigenvalues above 1e-10 of ``rows^T rows``."""
    rows = np.atleast_2d(rows)
    if rows.shape[0] == 0:
        return 1.0
    lam = np.linalg.eigvalsh(rows.T @ rows)
    return float(np.prod(lam[lam > EIG_FLOOR]))


def _pick(scores: np.ndarray, allowed: np.ndarray) -> int:
    """Lowest allowed index whose score is within 1e-12 (relative) of the best."""
    s = np.where(allowed, scores, -np.inf)
    best = s.max()
    tol = 1e-12 * max(abs(best), 1e-300)
    return int(np.argmax(s >= best - tol))


def maxdet_place(U_sel, m: int, orientation: str = "node",
                 basis_selected=None) -> SamplingSet:
    """Greedy row selection maximising the pseudo-determinant of ``U_S^T U_S``.

    Candidates that raise the rank of the selection always win over those
    that do not; among rank-raising rows the pseudo-determinant grows by the
    squared residual of the row against the span already chosen, and once
    the span is saturated it grows by ``1 + u^T G^+ u``.  Both factors are
    tracked incrementally.  Ties go to the lowest index.
    """
    U = np.asarray(U_sel, dtype=float)
    if U.ndim != 2:
        raise ValueError("U_sel must be a matrix")
    n, K = U.shape
    if not 1 <= m <= n:
        raise ValueError(f"m must lie in [1, {n}], got {m}")
    chosen: list[int] = []
    free = np.ones(n, dtype=bool)
    R = U.copy()  # rows minus their projection on the chosen span
    resid = np.einsum("ij,ij->i", R, R)
    row_norm = np.einsum("ij,ij->i", U, U)
    rank = 0
    for _ in range(m):
        raising = free & (resid > EIG_FLOOR * np.maximum(row_norm, 1.0)) & (rank < K)
        if raising.any():
            i = _pick(resid, raising)
            q = R[i] / np.sqrt(resid[i])
            R -= np.outer(R @ q, q)
            resid = np.einsum("ij,ij->i", R, R)
            rank += 1
        else:
            S = U[chosen]
            G = S.T @ S
            Gp = np.linalg.pinv(G, rcond=EIG_FLOOR, hermitian=True)
            gain = np.einsum("ij,jk,ik->i", U, Gp, U)
            i = _pick(gain, free)
        chosen.append(i)
        free[i] = False
    selected = None if basis_selected is None else tuple(basis_selected)
    return SamplingSet(chosen, orientation, selected)


def interpolation_operator(S: SamplingSet, U_sel) -> np.ndarray:
    U = np.asarray(U_sel, dtype=float)
    n = U.shape[0]
    Dbar = ~S.mask(n)
    M = np.eye(n)
    M[Dbar] -= U[Dbar] @ U.T
    return M


def interpolate(y, S: SamplingSet, U_sel) -> np.ndarray:
    """Recover a band-limited signal from its samples on ``S``.

    Solves ``(I - Dbar_S U U^T) x = y``; entries of ``y`` off ``S`` are
    ignored.
    """
    U = np.asarray(U_sel, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.shape[0] != U.shape[0]:
        raise ValueError(f"sample vector has {y.shape[0]} entries, basis has {U.shape[0]} rows")
    M = interpolation_operator(S, U)
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise RecoveryError(
            f"interpolation operator is ill-conditioned (cond={cond:.3e}); "
            f"sample more elements than the {len(S)} in S or shrink the band")
    return np.linalg.solve(M, np.where(S.mask(U.shape[0]), y, 0.0))


def write_sampling(S: SamplingSet, ids, path) -> None:
    with open(path, "w") as fh:
        fh.write("index,id\n")
        for i in S.indices:
            fh.write(f"{i},{ids[i]}\n")
