"""Dense real linear algebra used throughout the package.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. Singular
values come from LAPACK's divide-and-conquer SVD through numpy.
"""

import numpy as np

RANK_TOL = 1e-8


class InvalidInputError(ValueError):
    """Raised on non-finite or malformed matrix input."""


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class RankDeficiencyError(np.linalg.LinAlgError):
    """Raised when a solve would require inverting a near-singular Gram matrix.

    Attributes
    ----------
    sigma : float
        The smallest singular value that fell below the threshold.
    """

    def __init__(self, sigma, tol=RANK_TOL, what="matrix"):
        self.sigma = float(sigma)
        self.tol = tol
        super().__init__(
            f"{what} is rank deficient: sigma_min={self.sigma:.3e} < {tol:.0e}")


def as_matrix(M, name="M"):
    """Return ``M`` as a finite 2-d float64 array."""
    M = np.asarray(M, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    elif M.ndim == 1:
        M = M.reshape(-1, 1)
    if M.ndim != 2:
        raise ShapeError(f"{name} must be 2-d, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return M


def singular_values(M):
    M = as_matrix(M)
    if M.size == 0:
        raise InvalidInputError("empty matrix")
    return np.linalg.svd(M, compute_uv=False)


def spectral_norm(M):
    """Largest singular value of ``M``."""
    return float(singular_values(M)[0])


def sigma_min(M):
    """Smallest singular value of ``M``.

    For a wide matrix this is the ``min(rows, cols)``-th singular value, so a
    full-row-rank ``M`` satisfies ``sigma_min(M)**2 * ||(M M^T)^-1|| == 1``.
    """
    return float(singular_values(M)[-1])


def solve_least_squares(A, B, tol=RANK_TOL):
    """Return ``X`` minimizing ``||X A - B||_F``, i.e. ``B A^T (A A^T)^-1``.

    ``A`` must have full row rank with ``sigma_min(A) >= tol``; otherwise a
    :class:`RankDeficiencyError` is raised rather than regularizing.
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if A.shape[1] != B.shape[1]:
        raise ShapeError(f"column mismatch: A {A.shape}, B {B.shape}")
    if A.shape[0] > A.shape[1]:
        raise RankDeficiencyError(0.0, tol, "A (more rows than columns)")
    s = sigma_min(A)
    if s < tol:
        raise RankDeficiencyError(s, tol, "A")
    # X A = B  <=>  A^T X^T = B^T, solved by QR-based lstsq on the tall system.
    X, *_ = np.linalg.lstsq(A.T, B.T, rcond=None)
    return X.T


def project_spectral_ball(M, r):
    """Frobenius-nearest matrix to ``M`` with spectral norm at most ``r``."""
    if r < 0:
        raise InvalidInputError(f"radius must be nonnegative, got {r}")
    M = as_matrix(M)
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    if s[0] <= r:
        return M.copy()
    return (U * np.minimum(s, r)) @ Vt


def mat_power(M, p):
    M = as_matrix(M)
    if M.shape[0] != M.shape[1]:
        raise ShapeError(f"matrix power needs a square matrix, got {M.shape}")
    if p < 0 or int(p) != p:
        raise InvalidInputError(f"exponent must be a nonnegative integer, got {p}")
    return np.linalg.matrix_power(M, int(p))


def spectral_radius(M):
    M = as_matrix(M)
    return float(np.max(np.abs(np.linalg.eigvals(M))))
