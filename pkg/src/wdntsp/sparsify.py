"""Sparse spectral support by basis pursuit over an orthonormal eigenbasis."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .spectral import SpectralBasis

DEFAULT_EPSILON_FRACTION = 0.05
NOISE_FLOOR = 1e-12


@dataclass(frozen=True)
class SparsityResult:
    selected: tuple[int, ...]
    coefficients: np.ndarray
    residual_norm: float
    epsilon: float
    threshold: float


def _residual(mags: np.ndarray, theta: float) -> float:
    clipped = np.minimum(mags, theta)
    return float(np.sqrt(np.sum(clipped * clipped)))


def sparse_support(snapshots, basis: SpectralBasis, epsilon: float | None = None) -> SparsityResult:
    """Minimum-L1 coefficients ``C`` with ``||X - U C||_F <= epsilon``.

    Because ``U`` is orthonormal the problem is solved exactly by
    soft-thresholding ``U^T X`` at the largest level whose clipped mass
    ``sqrt(sum min(|c|, theta)^2)`` still fits in ``epsilon``; that level is
    bracketed by bisection.  The support is the set of rows with a surviving
    coefficient in any snapshot.  Coefficients below ``1e-12 * ||X||_F`` are
    rounding noise and never survive.
    """
    X = np.asarray(snapshots, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != basis.size:
        raise ValueError(f"snapshots have {X.shape[0]} rows, basis has {basis.size}")
    norm = float(np.linalg.norm(X))
    if norm == 0.0:
        raise ValueError("snapshots are identically zero")
    if epsilon is None:
        epsilon = DEFAULT_EPSILON_FRACTION * norm
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")

    coef = basis.U.T @ X
    coef[np.abs(coef) <= NOISE_FLOOR * norm] = 0.0
    mags = np.abs(coef)
    top = float(mags.max())
    if epsilon >= norm:
        warnings.warn("epsilon >= ||X||_F: the empty support is optimal", stacklevel=2)
        return SparsityResult((), np.zeros_like(coef), _residual(mags, top), float(epsilon), top)

    lo, hi = 0.0, top
    if _residual(mags, hi) <= epsilon:
        lo = hi
    while hi - lo > 1e-12 * max(1.0, top):
        mid = 0.5 * (lo + hi)
        if _residual(mags, mid) <= epsilon:
            lo = mid
        else:
            hi = mid
    theta = lo
    shrunk = np.sign(coef) * np.maximum(mags - theta, 0.0)
    selected = tuple(int(i) for i in np.nonzero(np.any(shrunk != 0.0, axis=1))[0])
    return SparsityResult(selected, shrunk, _residual(mags, theta), float(epsilon), theta)


def write_selected(indices, path) -> None:
    with open(path, "w") as fh:
        fh.write("index\n")
        for i in indices:
            fh.write(f"{int(i)}\n")
