"""Helpers for the banded storage used by the stepping and resolvent kernels.

Public matrices are ordered field-by-field (all V nodes, then all P nodes).
Interleaving the fields node by node turns them into narrow-band matrices.
"""
from __future__ import annotations

import numpy as np


def interleave_permutation(n_fields: int, n_nodes: int) -> np.ndarray:
    """Index array ``perm`` so that ``x[perm]`` is ordered node by node."""
    return np.arange(n_fields * n_nodes).reshape(n_fields, n_nodes).T.ravel()


def bandwidth(a: np.ndarray) -> int:
    i, j = np.nonzero(a)
    if i.size == 0:
        return 0
    return int(np.max(np.abs(i - j)))


def to_lower_band(a: np.ndarray, b: int) -> np.ndarray:
    """Symmetric matrix to LAPACK lower band form, ``ab[k, j] = a[j + k, j]``."""
    n = a.shape[0]
    ab = np.zeros((b + 1, n), dtype=a.dtype)
    for k in range(b + 1):
        ab[k, : n - k] = np.diagonal(a, -k)
    return ab


def to_general_band(a: np.ndarray, kl: int, ku: int, lu_space: bool = True) -> np.ndarray:
    """General band form for ``?gbtrf``: ``ab[kl + ku + i - j, j] = a[i, j]``.

    With ``lu_space=False`` the ``kl`` spare rows for fill-in are omitted.
    """
    n = a.shape[0]
    off = kl if lu_space else 0
    ab = np.zeros((off + kl + ku + 1, n), dtype=a.dtype)
    for d in range(-kl, ku + 1):
        diag = np.diagonal(a, d)
        row = off + ku - d
        if d >= 0:
            ab[row, d:] = diag
        else:
            ab[row, : n + d] = diag
    return ab


def sym_band_matvec(ab: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``A @ x`` for symmetric ``A`` in lower band form; ``x`` may be 2-D."""
    n = ab.shape[1]
    y = ab[0][:, None] * x if x.ndim == 2 else ab[0] * x
    for k in range(1, ab.shape[0]):
        c = ab[k, : n - k]
        if x.ndim == 2:
            c = c[:, None]
        y[: n - k] += c * x[k:]
        y[k:] += c * x[: n - k]
    return y
