"""
Small dense complex linear algebra for the precoders.

Matrices are plain complex numpy arrays. Every function accepts optional
leading batch dimensions (``(..., m, n)``) so that a whole block of slots
can be processed in one call; the factorization itself is a hand-written
Cholesky decomposition, which is all the tiny (at most 8x8) Gram matrices
of the simulator ever need.

Channel matrices follow one orientation throughout the package: one
receiver per row and one transmit antenna per column (``R x N_t``). With
that convention the effective channel of a precoder ``W`` is ``h @ W``.
"""

import numpy as np

from .errors import DimensionMismatch, InsufficientAntennas, SingularMatrix

__all__ = ["as_cmatrix", "hermitian", "matmul", "solve_hermitian",
           "pinv_right", "PIVOT_TOL"]

# Relative pivot floor of the Cholesky factorization.
PIVOT_TOL = 1e-12


def as_cmatrix(m):
    """Coerce ``m`` to a complex array of at least two dimensions.

    Raises
    ------
    DimensionMismatch
        If the input is empty.
    ValueError
        If any entry is NaN or infinite.
    """
    a = np.asarray(m, dtype=complex)
    if a.ndim < 2:
        a = a.reshape(1, -1) if a.ndim == 1 else a.reshape(1, 1)
    if a.size == 0:
        raise DimensionMismatch("empty matrix")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def hermitian(m):
    """Conjugate transpose over the last two axes."""
    a = np.asarray(m, dtype=complex)
    return np.conj(np.swapaxes(a, -1, -2))


def matmul(a, b):
    """Complex matrix product with an explicit inner-dimension check."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionMismatch("matmul needs matrices, got ndim "
                                f"{a.ndim} and {b.ndim}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionMismatch(
            f"cannot multiply {a.shape[-2]}x{a.shape[-1]} by "
            f"{b.shape[-2]}x{b.shape[-1]}")
    return a @ b


def _cholesky(a):
    """Lower-triangular ``L`` with ``a == L @ L^H``, batched."""
    n = a.shape[-1]
    L = np.zeros_like(a)
    diag = np.real(np.diagonal(a, axis1=-2, axis2=-1))
    scale = np.max(np.abs(diag), axis=-1)
    for j in range(n):
        Lj = L[..., j, :j]
        pivot = diag[..., j] - np.sum(np.abs(Lj) ** 2, axis=-1)
        if np.any(~(pivot > PIVOT_TOL * scale)):
            raise SingularMatrix(
                f"non-positive pivot at column {j} (matrix is not "
                "positive definite or is numerically rank deficient)")
        d = np.sqrt(pivot)
        L[..., j, j] = d
        if j + 1 < n:
            # L[i, j] = (a[i, j] - sum_k L[i, k] conj(L[j, k])) / L[j, j]
            below = a[..., j + 1:, j] - np.einsum(
                "...ik,...k->...i", L[..., j + 1:, :j], np.conj(Lj))
            L[..., j + 1:, j] = below / d[..., None]
    return L


def solve_hermitian(a, b):
    """
    Solve ``a @ X = b`` for Hermitian positive definite ``a``.

    Parameters
    ----------
    a : array_like, shape (..., n, n)
        Hermitian positive definite matrix (or batch of them). Only the
        lower triangle is read.
    b : array_like, shape (..., n, m)
        Right-hand sides.

    Returns
    -------
    X : ndarray, shape (..., n, m)

    Raises
    ------
    SingularMatrix
        When a Cholesky pivot falls below ``PIVOT_TOL`` times the largest
        diagonal entry, which is how a rank-deficient compound channel
        shows up.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise DimensionMismatch(f"expected a square matrix, got {a.shape}")
    if b.ndim < 2 or b.shape[-2] != a.shape[-1]:
        raise DimensionMismatch(
            f"right-hand side has {b.shape[-2] if b.ndim >= 2 else '?'} rows,"
            f" expected {a.shape[-1]}")
    n = a.shape[-1]
    L = _cholesky(a)
    batch = np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    y = np.zeros(batch + b.shape[-2:], dtype=complex)
    b = np.broadcast_to(b, y.shape)
    L = np.broadcast_to(L, batch + L.shape[-2:])
    # forward substitution L y = b
    for i in range(n):
        acc = b[..., i, :] - np.einsum("...k,...km->...m",
                                       L[..., i, :i], y[..., :i, :])
        y[..., i, :] = acc / L[..., i, i][..., None]
    # back substitution L^H x = y
    x = np.zeros_like(y)
    LH = np.conj(np.swapaxes(L, -1, -2))
    for i in range(n - 1, -1, -1):
        acc = y[..., i, :] - np.einsum("...k,...km->...m",
                                       LH[..., i, i + 1:], x[..., i + 1:, :])
        x[..., i, :] = acc / LH[..., i, i][..., None]
    return x


def pinv_right(h):
    """
    Minimum-norm right inverse ``W = h^H (h h^H)^{-1}`` of a wide matrix.

    ``h`` has one receiver per row (``R``) and one antenna per column
    (``N_t``); the result ``W`` is ``N_t x R`` and satisfies ``h @ W = I_R``.

    Raises
    ------
    InsufficientAntennas
        If ``R > N_t``.
    SingularMatrix
        If ``h`` does not have full row rank.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim < 2:
        raise DimensionMismatch("pinv_right needs a matrix")
    r, n_t = h.shape[-2:]
    if r > n_t:
        raise InsufficientAntennas(
            f"{r} receivers cannot be inverted with {n_t} antennas")
    hh = hermitian(h)
    eye = np.broadcast_to(np.eye(r, dtype=complex), h.shape[:-2] + (r, r))
    return hh @ solve_hermitian(h @ hh, eye)
