"""Dense linear-algebra kernel.

Thin, checked wrappers around LAPACK (through numpy/scipy).  The contracts
are accuracy contracts; the tests hold them against independent oracles.
"""
from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg as sla


class SingularMatrixError(np.linalg.LinAlgError):
    """Matrix is singular to working precision."""

    def __init__(self, message: str, pivot: float):
        super().__init__(message)
        self.pivot = pivot


class ConvergenceError(np.linalg.LinAlgError):
    def __init__(self, message: str, iterations: int | None = None):
        super().__init__(message)
        self.iterations = iterations


def _square(a) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def solve(a, b) -> np.ndarray:
    """Solve ``a x = b`` by LU with partial pivoting.

    Raises :class:`SingularMatrixError` carrying the smallest pivot magnitude
    when the factorisation breaks down or the pivot is below roundoff.
    """
    a = _square(a)
    with warnings.catch_warnings():
        # singularity is reported through the pivot check below
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(a, check_finite=True)
    pivots = np.abs(np.diag(lu))
    pmin = float(pivots.min()) if pivots.size else 0.0
    scale = float(np.abs(a).max()) if a.size else 0.0
    if pmin <= np.finfo(float).eps * scale * a.shape[0] or pmin == 0.0:
        raise SingularMatrixError(f"matrix is singular to working precision (pivot {pmin:.3e})", pmin)
    return sla.lu_solve((lu, piv), b)


def eig(a) -> np.ndarray:
    """All eigenvalues of a real or complex square matrix (unordered)."""
    a = _square(a)
    try:
        return sla.eigvals(a, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigenvalue iteration failed: {exc}") from exc


def smallest_singular_value(a) -> float:
    """``sigma_min(a)`` from the full singular value spectrum.

    Exactly singular input returns 0.
    """
    a = _square(a)
    if a.size == 0:
        return 0.0
    try:
        s = sla.svdvals(a)
    except np.linalg.LinAlgError:
        s = sla.svd(a, compute_uv=False, lapack_driver="gesvd")
    return float(s.min())


def weighted_norm(x, w_factor) -> float:
    """``||F x||_2 = sqrt(x* W x)`` given a factor ``F`` with ``F* F = W``."""
    x = np.asarray(x)
    f = np.asarray(w_factor)
    if f.ndim != 2 or f.shape[1] != x.shape[0]:
        raise ValueError(f"factor of shape {f.shape} cannot act on vector of length {x.shape[0]}")
    return float(np.linalg.norm(f @ x))
