"""Frobenius projections used by the constrained trainers.

Two feasible sets appear:

* matrices whose quadratic form is at least gamma on every unit vector,
  equivalently min-eig of the symmetric part >= gamma.  The set is convex
  and the Frobenius projection splits orthogonally: clip the symmetric
  part's eigenvalues at gamma, keep the skew part untouched.
* operator-norm balls of radius psi around the identity, with an optional
  symmetric positive semidefinite variant whose eigenvalues are clipped
  onto [max(0, 1 - psi), 1 + psi].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matcore import as_mat, frob_norm, op_norm, require_square, skew, sym


@dataclass(frozen=True)
class GammaPositiveSet:
    """Matrices A with u.T A u >= gamma for every unit u (closed set)."""

    gamma: float

    def __post_init__(self):
        if not self.gamma > 0.0:
            raise ValueError("gamma must be positive")

    def contains(self, a, tol: float = 0.0) -> bool:
        a = as_mat(a)
        require_square(a)
        return bool(np.linalg.eigvalsh(sym(a))[0] >= self.gamma - tol)

    def project(self, a) -> np.ndarray:
        return project_gamma_positive(a, self.gamma)


@dataclass(frozen=True)
class IdentityBall:
    """Operator-norm ball of the given radius around the identity; the
    psd_constrained variant additionally intersects with the symmetric
    positive semidefinite cone."""

    radius: float
    psd_constrained: bool = False

    def __post_init__(self):
        if self.radius < 0.0:
            raise ValueError("radius must be nonnegative")


def project_gamma_positive(a, gamma: float) -> np.ndarray:
    """Nearest (Frobenius) matrix whose symmetric part has min-eig >= gamma.

    The skew part passes through untouched up to the single rounding of the
    final addition; feasible input is returned bitwise as is.
    """
    if not gamma > 0.0:
        raise ValueError("gamma must be positive")
    a = as_mat(a)
    require_square(a)
    s = sym(a)
    w, v = np.linalg.eigh(s)
    if w[0] >= gamma:
        return a.copy()
    clipped = (v * np.maximum(w, gamma)) @ v.T
    return sym(clipped) + skew(a)


def project_identity_ball(a, ball: IdentityBall) -> np.ndarray:
    """Frobenius projection onto an IdentityBall.

    General mode clips the singular values of A - I at the radius.  The psd
    mode requires symmetric input and clips eigenvalues onto
    [max(0, 1 - radius), 1 + radius]; the result then commutes with the
    input.  Feasible input is returned unchanged.
    """
    a = as_mat(a)
    d = require_square(a)
    if ball.psd_constrained:
        scale = max(frob_norm(a), 1.0)
        if frob_norm(a - a.T) > 1e-10 * scale:
            raise ValueError("psd-constrained projection requires symmetric input")
        w, v = np.linalg.eigh(sym(a))
        lo = max(0.0, 1.0 - ball.radius)
        hi = 1.0 + ball.radius
        if w[0] >= lo and w[-1] <= hi:
            return a.copy()
        return sym((v * np.clip(w, lo, hi)) @ v.T)
    e = a - np.eye(d)
    if op_norm(e) <= ball.radius:
        return a.copy()
    u, s, vt = np.linalg.svd(e)
    return np.eye(d) + u @ (np.minimum(s, ball.radius)[:, None] * vt)
