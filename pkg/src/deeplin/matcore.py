"""Dense small-matrix kernel consumed by every other module.

Conventions that the rest of the package relies on:

* ``vec`` stacks columns (column-major).  All Kronecker identities used in
  the second-derivative assembly assume column stacking, so this choice is
  load-bearing.
* Matrices are float64 ndarrays, treated as immutable once validated.
* Dimensions are desk scale.  ``as_mat`` and the domain constructors enforce
  the bounds below at construction time.
* Tolerances are relative to the Frobenius scale of the operands with an
  absolute floor of ``ABS_FLOOR``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError

# Construction-time bounds.  The full second-derivative matrix is
# (L d^2) x (L d^2), so its side length gets its own cap.
MAX_DIM = 16
MAX_LAYERS = 64
MAX_HESSIAN_SIDE = 4096

ABS_FLOOR = 1e-12


def as_mat(a, name: str = "matrix", max_dim: int = MAX_DIM) -> np.ndarray:
    """Validate ``a`` as a dense 2-D float64 matrix and return it.

    Rejects non-2D input, non-finite entries, and dimensions beyond the
    configured bound.
    """
    out = np.asarray(a, dtype=float)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {out.shape}")
    if out.shape[0] > max_dim or out.shape[1] > max_dim:
        raise ValueError(
            f"{name} has shape {out.shape}, beyond the configured bound {max_dim}"
        )
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} has non-finite entries")
    return out


def require_square(a: np.ndarray, name: str = "matrix") -> int:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    return a.shape[0]


def kron(a, b) -> np.ndarray:
    """Kronecker product.  Inputs may be intermediate (large) matrices."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("kron expects 2-D operands")
    return np.kron(a, b)


def vec(a) -> np.ndarray:
    """Column-stacking vectorization, returned as an (mn, 1) column."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError("vec expects a 2-D operand")
    return a.reshape(-1, 1, order="F")


def unvec(v, rows: int, cols: int) -> np.ndarray:
    """Inverse of ``vec`` for a vector with rows*cols entries."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size != rows * cols:
        raise ValueError(f"cannot reshape {v.size} entries into {rows}x{cols}")
    return v.reshape(rows, cols, order="F")


def commutation_matrix(m: int, n: int) -> np.ndarray:
    """Permutation T with T @ vec(A) = vec(A.T) for every m x n matrix A."""
    if m < 1 or n < 1:
        raise ValueError("commutation matrix needs positive dimensions")
    t = np.zeros((m * n, m * n))
    r, c = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
    # a_{rc} sits at c*m + r in vec(A) and at r*n + c in vec(A.T)
    t[(r * n + c).ravel(), (c * m + r).ravel()] = 1.0
    return t


def sym(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return (a + a.T) / 2.0


def skew(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return (a - a.T) / 2.0


def rotation(theta: float) -> np.ndarray:
    """2x2 counterclockwise rotation by ``theta`` radians."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def frob_norm(a) -> float:
    return float(np.linalg.norm(np.asarray(a, dtype=float)))


def cond_estimate(a) -> float:
    """2-norm condition estimate; inf when it cannot be computed."""
    try:
        return float(np.linalg.cond(np.asarray(a, dtype=float)))
    except np.linalg.LinAlgError:
        return float("inf")


def singular_values(a) -> np.ndarray:
    """Singular values in descending order."""
    a = np.asarray(a, dtype=float)
    try:
        return np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(
            f"singular value computation failed: {exc}; cond~{cond_estimate(a):.3e}"
        ) from exc


def op_norm(a) -> float:
    """Spectral (operator 2-) norm."""
    return float(singular_values(a)[0])


def sigma_min(a) -> float:
    """Smallest singular value."""
    return float(singular_values(a)[-1])


@dataclass(frozen=True)
class SpectralData:
    """Singular values (descending), eigenvalues for square input, and the
    orthonormal singular bases."""

    singular_values: np.ndarray
    eigenvalues: np.ndarray | None
    left_basis: np.ndarray
    right_basis: np.ndarray


def spectral(a) -> SpectralData:
    """Full spectral summary of a matrix.

    Eigenvalues (complex) are included only for square input.  Decomposition
    failures surface as NumericError carrying a condition estimate.
    """
    a = as_mat(a, max_dim=MAX_HESSIAN_SIDE)
    try:
        u, s, vt = np.linalg.svd(a)
        eig = np.linalg.eigvals(a) if a.shape[0] == a.shape[1] else None
    except np.linalg.LinAlgError as exc:
        raise NumericError(
            f"spectral decomposition failed: {exc}; cond~{cond_estimate(a):.3e}"
        ) from exc
    return SpectralData(s, eig, u, vt.T)
