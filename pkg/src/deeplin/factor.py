"""Polar decomposition, principal matrix roots, and balanced factorization.

``balanced_factorization(a, L)`` writes an invertible matrix as a product of
L factors that all share the singular values ``sigma(a) ** (1/L)``.  The
construction takes the polar form a = r p, the principal roots of each part,
and conjugates the scaling root by powers of the rotation root so the pieces
telescope.

Principal roots are real matrices.  The orthogonal root comes from the real
Schur form: rotation blocks have their angles divided by L, so an eigenvalue
at -1 (rotation by pi) has no real principal root and is rejected loudly.
The symmetric root comes from an eigendecomposition with a positivity floor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NoRealRootError, NumericError, SingularInputError
from .matcore import as_mat, cond_estimate, frob_norm, require_square, rotation, singular_values, sym

ORTHO_TOL = 1e-8
# Schur block angles within this of +-pi count as an eigenvalue at -1.
NEG_ONE_ANGLE_TOL = 1e-8
SPD_FLOOR = 1e-12
RECON_TOL = 1e-8


@dataclass(frozen=True)
class PolarParts:
    """Orthogonal factor ``r`` and symmetric positive semidefinite ``p``
    with ``r @ p`` equal to the input."""

    r: np.ndarray
    p: np.ndarray


@dataclass(frozen=True)
class FactorizationResult:
    """Factors in product order (factors[0] leftmost) plus residuals.

    ``reconstruction_residual`` is relative to the input's Frobenius norm;
    ``balance_residual`` is the largest absolute deviation of any factor's
    singular values from ``sigma(a) ** (1/L)``.
    """

    factors: tuple
    reconstruction_residual: float
    balance_residual: float


def polar(a) -> PolarParts:
    """Polar decomposition a = r p via the SVD.

    Requires ``a`` square and, for downstream root-taking, invertible; rank
    deficiency beyond tolerance raises SingularInputError.
    """
    a = as_mat(a)
    require_square(a)
    try:
        u, s, vt = np.linalg.svd(a)
    except np.linalg.LinAlgError as exc:
        raise NumericError(
            f"svd failed in polar decomposition: {exc}; cond~{cond_estimate(a):.3e}"
        ) from exc
    if s[-1] <= SPD_FLOOR * max(s[0], 1.0):
        raise SingularInputError(
            f"input is numerically singular (sigma_min={s[-1]:.3e}); "
            "polar factors would not support root-taking"
        )
    r = u @ vt
    p = sym(vt.T @ (s[:, None] * vt))
    return PolarParts(r, p)


def principal_root_orthogonal(r, L: int) -> np.ndarray:
    """Principal L-th root of an orthogonal matrix, itself orthogonal.

    Works on the real Schur form: 1x1 blocks must be positive (an eigenvalue
    at -1 admits no real principal root), 2x2 rotation blocks get their angle
    divided by L.
    """
    r = as_mat(r)
    d = require_square(r)
    if not isinstance(L, (int, np.integer)) or L < 1:
        raise ValueError("L must be a positive integer")
    if frob_norm(r.T @ r - np.eye(d)) > ORTHO_TOL * d:
        raise ValueError("input is not orthogonal within tolerance")
    if L == 1:
        return r.copy()
    t, q = scipy.linalg.schur(r, output="real")
    root_t = np.zeros_like(t)
    k = 0
    while k < d:
        two_by_two = k + 1 < d and abs(t[k + 1, k]) > 1e-13 * max(1.0, abs(t[k, k]))
        if two_by_two:
            c = (t[k, k] + t[k + 1, k + 1]) / 2.0
            s = (t[k + 1, k] - t[k, k + 1]) / 2.0
            theta = float(np.arctan2(s, c))
            if np.pi - abs(theta) < NEG_ONE_ANGLE_TOL:
                raise NoRealRootError(
                    f"eigenvalue at -1 (rotation angle {theta:.6f}); "
                    "no real principal root exists"
                )
            # Near-orthogonal input may carry magnitude slightly off 1.
            mag = float(np.sqrt(max(t[k, k] * t[k + 1, k + 1] - t[k, k + 1] * t[k + 1, k], SPD_FLOOR)))
            root_t[k : k + 2, k : k + 2] = mag ** (1.0 / L) * rotation(theta / L)
            k += 2
        else:
            val = t[k, k]
            if val < 0.0:
                raise NoRealRootError(
                    "eigenvalue at -1; no real principal root exists"
                )
            root_t[k, k] = val ** (1.0 / L)
            k += 1
    return q @ root_t @ q.T


def principal_root_spd(p, L: int) -> np.ndarray:
    """Principal L-th root of a symmetric positive definite matrix."""
    p = as_mat(p)
    d = require_square(p)
    if not isinstance(L, (int, np.integer)) or L < 1:
        raise ValueError("L must be a positive integer")
    scale = max(frob_norm(p), 1.0)
    if frob_norm(p - p.T) > 1e-10 * scale:
        raise ValueError("input is not symmetric within tolerance")
    w, v = np.linalg.eigh(sym(p))
    if w[0] <= SPD_FLOOR * max(w[-1], 1.0):
        raise SingularInputError(
            f"eigenvalue {w[0]:.3e} below the positivity floor; input is not "
            "positive definite"
        )
    root = (v * w ** (1.0 / L)) @ v.T
    return sym(root)


def balanced_factorization(a, L: int) -> FactorizationResult:
    """Split ``a`` into L factors with identical singular values.

    With a = r p polar, factor i is ``r1 @ (rk @ p1 @ rk.T)`` where r1, p1
    are the principal L-th roots and rk = r1 ** (L - i); the conjugations
    cancel in the product.  Factors are returned in product order, so
    ``factors[0] @ ... @ factors[-1]`` reconstructs ``a``.
    """
    a = as_mat(a)
    require_square(a)
    if not isinstance(L, (int, np.integer)) or L < 1:
        raise ValueError("L must be a positive integer")
    parts = polar(a)
    r_root = principal_root_orthogonal(parts.r, L)
    p_root = principal_root_spd(parts.p, L)

    powers = [np.eye(a.shape[0])]
    for _ in range(L - 1):
        powers.append(powers[-1] @ r_root)
    factors = []
    for i in range(1, L + 1):
        rk = powers[L - i]
        factors.append(r_root @ rk @ p_root @ rk.T)

    prod = factors[0]
    for f in factors[1:]:
        prod = prod @ f
    scale = max(frob_norm(a), 1.0)
    recon = frob_norm(prod - a) / scale
    target_sv = singular_values(a) ** (1.0 / L)
    balance = max(
        float(np.max(np.abs(singular_values(f) - target_sv))) for f in factors
    )
    if recon > RECON_TOL:
        raise NumericError(
            f"balanced factorization failed to reconstruct the input "
            f"(relative residual {recon:.3e}, d={a.shape[0]}, L={L}, "
            f"cond~{cond_estimate(a):.3e})"
        )
    return FactorizationResult(tuple(factors), recon, balance)
