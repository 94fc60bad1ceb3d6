"""Symmetric eigendecomposition, cell Fourier transform and Hodge decomposition."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .errors import NumericalError

JACOBI_TOL = 1e-15
JACOBI_MAX_SWEEPS = 80


@dataclass(frozen=True)
class SpectralBasis:
    """Eigenvectors (columns of ``U``) with ascending eigenvalues ``lam``.

    ``selected`` optionally holds the ascending index set of a band-limited
    support.
    """

    U: np.ndarray
    lam: np.ndarray
    source: str = ""
    selected: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.selected is not None:
            sel = tuple(sorted(int(i) for i in set(self.selected)))
            if sel and (sel[0] < 0 or sel[-1] >= self.U.shape[1]):
                raise IndexError(f"selected indices out of range 0..{self.U.shape[1] - 1}")
            object.__setattr__(self, "selected", sel)

    @property
    def size(self) -> int:
        return self.U.shape[0]

    @property
    def U_sel(self) -> np.ndarray:
        if self.selected is None:
            return self.U
        return self.U[:, list(self.selected)]

    def with_selection(self, indices) -> "SpectralBasis":
        return replace(self, selected=tuple(indices))

    def orthonormality_error(self) -> float:
        return float(np.max(np.abs(self.U.T @ self.U - np.eye(self.U.shape[1]))))


def _sign_normalize(U: np.ndarray) -> np.ndarray:
    """Flip columns so their largest-magnitude entry is positive.

    Entries within 1e-9 (relative) of the column maximum count as ties and
    the first of them decides, which keeps the choice stable under rounding.
    """
    U = U.copy()
    mags = np.abs(U)
    peak = mags.max(axis=0)
    for j in range(U.shape[1]):
        if peak[j] == 0.0:
            continue
        i = int(np.argmax(mags[:, j] >= peak[j] * (1.0 - 1e-9)))
        if U[i, j] < 0:
            U[:, j] = -U[:, j]
    return U


def eig_sym(matrix, source: str = "", method: str = "jacobi") -> SpectralBasis:
    """Eigendecomposition of a real symmetric matrix.

    ``method="jacobi"`` runs cyclic Jacobi rotations through the kernel
    backend; ``"lapack"`` defers to :func:`numpy.linalg.eigh`.  Both return
    ascending eigenvalues and sign-normalised eigenvectors.
    """
    A = np.array(matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    amax = float(np.max(np.abs(A))) if A.size else 0.0
    if A.size and np.max(np.abs(A - A.T)) > 1e-12 * max(1.0, amax):
        raise ValueError("matrix is not symmetric to 1e-12")
    if not np.all(np.isfinite(A)):
        raise NumericalError("matrix has non-finite entries")
    n = A.shape[0]
    A = np.ascontiguousarray(0.5 * (A + A.T))
    if method == "jacobi":
        Vt = np.eye(n)
        sweeps, converged = _kernels.jacobi(A, Vt, _kernels.round_robin(n),
                                            JACOBI_TOL, JACOBI_MAX_SWEEPS)
        V = Vt.T
        if not converged:
            raise NumericalError(f"Jacobi did not converge in {sweeps} sweeps")
        lam = np.diag(A).copy()
    elif method == "lapack":
        lam, V = np.linalg.eigh(A)
    else:
        raise ValueError(f"unknown method {method!r}")
    order = np.argsort(lam, kind="stable")
    return SpectralBasis(_sign_normalize(V[:, order]), lam[order], source)


def fourier(signal, basis: SpectralBasis) -> np.ndarray:
    x = np.asarray(signal, dtype=float)
    if x.shape[0] != basis.size:
        raise ValueError(f"signal length {x.shape[0]} != basis size {basis.size}")
    return basis.U.T @ x


def inverse_fourier(coefficients, basis: SpectralBasis) -> np.ndarray:
    c = np.asarray(coefficients, dtype=float)
    if c.shape[0] != basis.U.shape[1]:
        raise ValueError(f"{c.shape[0]} coefficients for {basis.U.shape[1]} basis vectors")
    return basis.U @ c


@dataclass(frozen=True)
class HodgeComponents:
    irrotational: np.ndarray
    solenoidal: np.ndarray
    harmonic: np.ndarray

    def total(self) -> np.ndarray:
        return self.irrotational + self.solenoidal + self.harmonic


def _project(A: np.ndarray, f: np.ndarray) -> np.ndarray:
    if A.shape[1] == 0:
        return np.zeros_like(f)
    coef, *_ = np.linalg.lstsq(A, f, rcond=None)
    return A @ coef


def hodge_decompose(f, b1, b2) -> HodgeComponents:
    """Split an edge signal into gradient, curl and harmonic parts.

    The gradient part is the orthogonal projection onto img(B1^T), the curl
    part the projection onto img(B2); both come from SVD-based least squares
    so rank-deficient incidence matrices are fine.
    """
    f = np.asarray(f, dtype=float)
    B1 = np.asarray(getattr(b1, "entries", b1), dtype=float)
    B2 = np.asarray(getattr(b2, "entries", b2), dtype=float)
    if B1.shape[1] != f.shape[0] or B2.shape[0] != f.shape[0]:
        raise ValueError(f"edge signal of length {f.shape[0]} does not match "
                         f"B1 {B1.shape} / B2 {B2.shape}")
    irr = _project(B1.T, f)
    sol = _project(B2, f)
    return HodgeComponents(irr, sol, f - irr - sol)


def write_eigenvalues(basis: SpectralBasis, path) -> None:
    with open(path, "w") as fh:
        fh.write("index,eigenvalue\n")
        for i, v in enumerate(basis.lam):
            fh.write(f"{i},{format(float(v), '.17g')}\n")


def write_eigenvectors(basis: SpectralBasis, path) -> None:
    np.savetxt(path, basis.U, delimiter=",", fmt="%.17g")
