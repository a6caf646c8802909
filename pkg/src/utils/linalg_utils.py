import math

import numpy as np
from scipy.linalg import ldl

from .constants import JACOBI_MAX_SWEEPS, JACOBI_REL_TOL

_EPS = float(np.finfo(float).eps)


def _offdiag_norm(A: np.ndarray) -> float:
    return math.sqrt(max(float(np.sum(A * A) - np.sum(np.diag(A) ** 2)), 0.0))


def jacobi_eigenvalues(
    m: np.ndarray, rel_tol: float = JACOBI_REL_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS
) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.

    Sweeps visit the pairs (p, q), p < q, in row order and stop once the
    off-diagonal Frobenius norm falls below `rel_tol` * ||m||_F.
    """
    A = np.array(m, dtype=float, copy=True)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"square matrix expected, got shape {A.shape}")
    scale = float(np.linalg.norm(A))
    target = rel_tol * scale
    for _ in range(max_sweeps):
        if _offdiag_norm(A) <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = float(A[p, q])
                if abs(apq) <= _EPS * (abs(A[p, p]) + abs(A[q, q])):
                    # below the rounding level of the diagonal: annihilate without rotating
                    A[p, q] = A[q, p] = 0.0
                    continue
                theta = float(A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p, col_q = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p, row_q = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = A[q, p] = 0.0
    return np.sort(np.diag(A))


def least_eigenvalue(m: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric matrix (cyclic Jacobi)."""
    m = np.asarray(m, dtype=float)
    if m.shape == (1, 1):
        return float(m[0, 0])
    return float(jacobi_eigenvalues(m)[0])


def leading_minors(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return np.array([np.linalg.det(m[:k, :k]) for k in range(1, m.shape[0] + 1)])


def sylvester_positive_definite(m: np.ndarray) -> bool:
    """Sylvester's criterion: all leading principal minors positive."""
    return bool(np.all(leading_minors(m) > 0.0))


def count_eigenvalues_below(m: np.ndarray, lam: float) -> int:
    """Number of eigenvalues of m strictly below lam.

    Sylvester's law of inertia on the pivoted (Bunch-Kaufman) factorization
    m - lam I = L D L^T: the count is the number of negative eigenvalues of the
    1x1 and 2x2 diagonal blocks of D.
    """
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    _, D, _ = ldl(m - lam * np.eye(n), lower=True)
    count, i = 0, 0
    while i < n:
        if i + 1 < n and D[i + 1, i] != 0.0:
            det = D[i, i] * D[i + 1, i + 1] - D[i + 1, i] ** 2
            tr = D[i, i] + D[i + 1, i + 1]
            if det < 0.0:
                count += 1
            elif tr < 0.0:
                count += 2 if det > 0.0 else 1
            i += 2
        else:
            count += int(D[i, i] < 0.0)
            i += 1
    return count


def bisect_least_eigenvalue(m: np.ndarray, tol: float = 1e-13) -> float:
    """Least eigenvalue by bisection on eigenvalue counts (Gershgorin bracket)."""
    m = np.asarray(m, dtype=float)
    radii = np.sum(np.abs(m), axis=1) - np.abs(np.diag(m))
    lo = float(np.min(np.diag(m) - radii)) - 1.0
    hi = float(np.max(np.diag(m) + radii)) + 1.0
    while hi - lo > tol * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        if count_eigenvalues_below(m, mid) >= 1:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
