"""Dense real linear-algebra and calculus kernels.

Matrices are plain 2-D ``float`` numpy arrays and polynomials are 1-D coefficient
arrays, highest degree first (the ``numpy.polyval`` convention).
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg

from .errors import NoConvergence, NotHurwitz, SingularMatrix

PIVOT_RTOL = 1e-12


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a finite 2-D float array (scalars become 1x1)."""
    m = np.atleast_2d(np.asarray(a, dtype=float))
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def max_norm(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def lu_solve(A, B) -> np.ndarray:
    """Solve ``A X = B`` by LU factorisation with partial pivoting.

    Raises:
        SingularMatrix: if a pivot is smaller than ``1e-12 * max|A|``.
    """
    A = as_matrix(A, "A")
    B = np.asarray(B, dtype=float)
    vector_rhs = B.ndim == 1
    B = B.reshape(-1, 1) if vector_rhs else B
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"A must be square, got {A.shape}")
    if B.shape[0] != n:
        raise ValueError(f"B has {B.shape[0]} rows, expected {n}")
    scale = max_norm(A)
    if scale == 0.0:
        raise SingularMatrix("zero matrix")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    if np.min(np.abs(np.diag(lu))) < PIVOT_RTOL * scale:
        raise SingularMatrix(f"pivot below {PIVOT_RTOL:g} * |A|max")
    X = scipy.linalg.lu_solve((lu, piv), B, check_finite=False)
    return X.ravel() if vector_rhs else X


def kron(A, B) -> np.ndarray:
    return np.kron(as_matrix(A, "A"), as_matrix(B, "B"))


def _pair_key(z: complex):
    return (round(z.real, 12), abs(z.imag), -z.imag)


def eigenvalues(A) -> np.ndarray:
    """Eigenvalues of a real square matrix, conjugate pairs adjacent.

    LAPACK ``geev`` does the Hessenberg reduction and shifted QR sweeps.
    """
    A = as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"A must be square, got {A.shape}")
    if A.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    try:
        lam = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    return np.array(sorted(lam.astype(complex), key=_pair_key), dtype=complex)


def is_hurwitz(A, margin: float = 0.0) -> bool:
    lam = eigenvalues(A)
    return bool(lam.size == 0 or np.max(lam.real) < -margin)


def spectral_abscissa(A) -> float:
    return float(np.max(eigenvalues(A).real))


def solve_lyapunov(A, Q) -> np.ndarray:
    """Solve ``A^T P + P A + Q = 0`` for symmetric ``P``.

    Uses the vectorised form ``(I kron A^T + A^T kron I) vec(P) = -vec(Q)``;
    O(n^6) but every system here has n <= 8.
    """
    A = as_matrix(A, "A")
    Q = as_matrix(Q, "Q")
    n = A.shape[0]
    if A.shape != (n, n) or Q.shape != (n, n):
        raise ValueError("A and Q must be square and of equal size")
    if not is_hurwitz(A):
        raise NotHurwitz(f"spectral abscissa {spectral_abscissa(A):.3g} >= 0")
    eye = np.eye(n)
    At = A.T
    L = np.kron(eye, At) + np.kron(At, eye)
    vec_p = lu_solve(L, -Q.reshape(-1, order="F"))
    P = vec_p.reshape((n, n), order="F")
    return 0.5 * (P + P.T)


def char_poly(A, return_adjugate: bool = False):
    """Characteristic polynomial ``det(sI - A)`` by Faddeev-LeVerrier.

    With ``return_adjugate`` also returns matrices ``M_1..M_n`` such that
    ``adj(sI - A) = sum_k M_k s^(n-k)``, which give transfer-function numerators.
    """
    A = as_matrix(A, "A")
    n = A.shape[0]
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    eye = np.eye(n)
    M = np.zeros((n, n))
    adj = []
    for k in range(1, n + 1):
        M = A @ M + coeffs[k - 1] * eye
        adj.append(M)
        coeffs[k] = -np.trace(A @ M) / k
    if return_adjugate:
        return coeffs, adj
    return coeffs


def trim_poly(p, rtol: float = 1e-12) -> np.ndarray:
    """Drop leading coefficients that are negligible relative to the largest."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    scale = max_norm(p)
    if scale == 0.0:
        return np.zeros(1)
    nz = np.nonzero(np.abs(p) > rtol * scale)[0]
    return p[nz[0]:].copy()


def poly_from_roots(roots) -> np.ndarray:
    """Monic real polynomial with the given (conjugate-closed) roots."""
    p = np.array([1.0 + 0j])
    for r in roots:
        p = np.convolve(p, [1.0, -r])
    return p.real


def poly_roots(p) -> np.ndarray:
    """Roots from the eigenvalues of the companion matrix."""
    p = trim_poly(p, rtol=0.0)
    deg = p.size - 1
    if deg < 1:
        raise ValueError("polynomial degree must be >= 1")
    # Zero roots would make the companion matrix needlessly ill-scaled.
    n_zero = 0
    while deg - n_zero >= 1 and p[deg - n_zero] == 0.0:
        n_zero += 1
    q = p[: deg - n_zero + 1] / p[0]
    m = q.size - 1
    roots = []
    if m >= 1:
        comp = np.zeros((m, m))
        comp[0, :] = -q[1:]
        comp[1:, :-1] = np.eye(m - 1)
        roots = list(eigenvalues(comp))
    roots.extend([0j] * n_zero)
    return np.array(sorted(roots, key=_pair_key), dtype=complex)


def polyval(p, s):
    """Horner evaluation (``s`` may be complex or an array)."""
    s = np.asarray(s)
    acc = np.zeros_like(s, dtype=complex if np.iscomplexobj(s) else float)
    for c in np.asarray(p, dtype=float):
        acc = acc * s + c
    return acc


def matrix_rank(M, rtol: float = 1e-9) -> int:
    """Rank by Gaussian elimination with full pivoting.

    A pivot counts when it exceeds ``rtol`` times the largest row norm of ``M``.
    """
    M = np.array(as_matrix(M, "M"), dtype=float)
    if M.size == 0:
        return 0
    tol = rtol * float(np.max(np.linalg.norm(M, axis=1)))
    if tol == 0.0:
        return 0
    rank = 0
    rows, cols = M.shape
    for _ in range(min(rows, cols)):
        sub = np.abs(M[rank:, rank:])
        i, j = np.unravel_index(np.argmax(sub), sub.shape)
        if sub[i, j] <= tol:
            break
        i += rank
        j += rank
        M[[rank, i]] = M[[i, rank]]
        M[:, [rank, j]] = M[:, [j, rank]]
        M[rank + 1:] -= np.outer(M[rank + 1:, rank] / M[rank, rank], M[rank])
        rank += 1
    return rank


def trapezoid(samples, dt: float) -> float:
    samples = np.asarray(samples, dtype=float)
    if samples.size < 2:
        raise ValueError("need at least two samples")
    if dt <= 0:
        raise ValueError("dt must be positive")
    return float(dt * (samples.sum() - 0.5 * (samples[0] + samples[-1])))
