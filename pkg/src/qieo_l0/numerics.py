"""Dense least-squares kernels shared by every support-based fitness."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RCOND = 1e-10


class ContractError(ValueError):
    """Raised when an operation is called outside its preconditions."""


@dataclass(frozen=True)
class RestrictedFit:
    """Least-squares fit with coefficients confined to ``support``.

    ``weights`` has the full column count and is exactly zero off-support.
    """

    weights: np.ndarray
    support: np.ndarray
    sse: float


def _as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ContractError(f"expected a 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ContractError("matrix has non-finite entries")
    return A


def _as_vector(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise ContractError(f"expected a 1-D vector, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise ContractError("vector has non-finite entries")
    return y


def least_squares(A, y) -> tuple[np.ndarray, float]:
    """Minimum-norm least-squares solution of ``A c ~= y``.

    Uses the SVD-based LAPACK driver; singular values below
    ``1e-10 * s_max`` are treated as zero.

    Returns
    -------
    coeffs : ndarray, shape (A.shape[1],)
    sse : float
        ``||y - A @ coeffs||^2`` computed from the explicit residual.
    """
    A = _as_matrix(A)
    y = _as_vector(y)
    if A.shape[0] != y.shape[0]:
        raise ContractError(f"A has {A.shape[0]} rows but y has length {y.shape[0]}")
    if A.shape[1] < 1:
        raise ContractError("A must have at least one column")
    if not np.any(A):
        return np.zeros(A.shape[1]), float(y @ y)
    coeffs = np.linalg.lstsq(A, y, rcond=RCOND)[0]
    r = y - A @ coeffs
    return coeffs, float(r @ r)


def restricted_least_squares(X, y, support) -> RestrictedFit:
    X = _as_matrix(X)
    y = _as_vector(y)
    n, p = X.shape
    if n != y.shape[0]:
        raise ContractError(f"X has {n} rows but y has length {y.shape[0]}")
    idx = np.unique(np.asarray(support, dtype=np.int64).ravel())
    if idx.size and (idx[0] < 0 or idx[-1] >= p):
        raise ContractError(f"support index out of range [0, {p})")
    weights = np.zeros(p)
    if idx.size == 0:
        return RestrictedFit(weights, idx, float(y @ y))
    coeffs, sse = least_squares(X[:, idx], y)
    weights[idx] = coeffs
    return RestrictedFit(weights, idx, sse)


def spectral_norm_sq(X, rtol: float = 1e-9, max_iter: int = 1000) -> float:
    """Largest eigenvalue of ``X.T @ X`` by power iteration.

    Starts from the normalized all-ones vector and stops once the Rayleigh
    quotient changes by less than ``rtol`` (relative).
    """
    X = _as_matrix(X)
    if X.size == 0:
        raise ContractError("X must be nonempty")
    if not np.any(X):
        return 0.0
    v = np.ones(X.shape[1]) / np.sqrt(X.shape[1])
    lam = 0.0
    for _ in range(max_iter):
        u = X.T @ (X @ v)
        new = float(v @ u)
        nu = np.linalg.norm(u)
        if nu == 0.0:
            # start vector in the null space; restart on the heaviest column
            v = np.zeros(X.shape[1])
            v[int(np.argmax(np.sum(X * X, axis=0)))] = 1.0
            lam = 0.0
            continue
        v = u / nu
        if abs(new - lam) <= rtol * abs(new):
            lam = new
            break
        lam = new
    # Rayleigh quotient of the final normalized iterate.
    Xv = X @ v
    return max(lam, float(Xv @ Xv))
