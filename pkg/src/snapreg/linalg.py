"""Dense real linear algebra with an explicit rank-tolerance policy.

Every routine accepts anything ``numpy.asarray`` understands, rejects
non-finite entries, and works in double precision. Singular values are
truncated against a threshold *relative* to the largest singular value, so
results do not change when the data is rescaled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from snapreg.errors import InvalidInputError, NumericalError

#: Default relative rank tolerance: singular values ``<= RTOL * sigma_max`` are dropped.
RTOL = 1e-9

#: Symmetry check for eigendecomposition: ``||M - M^T||_F <= SYM_TOL * ||M||_F``.
SYM_TOL = 1e-10


def as_matrix(m: ArrayLike, name: str = "matrix") -> NDArray[np.float64]:
    """Return ``m`` as a finite 2-D float64 array or raise InvalidInputError."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains NaN or Inf")
    return a


def as_vector(v: ArrayLike, name: str = "vector") -> NDArray[np.float64]:
    a = np.asarray(v, dtype=np.float64)
    if a.ndim == 2 and 1 in a.shape:
        a = a.ravel()
    if a.ndim != 1:
        raise InvalidInputError(f"{name} must be 1-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains NaN or Inf")
    return a


@dataclass(frozen=True)
class SvdFactors:
    """Economic SVD truncated to the numeric rank.

    ``U`` is m x r, ``V`` is n x r, both with orthonormal columns, and
    ``singular_values`` holds the r retained values in nonincreasing order.
    ``rank_tolerance`` is the absolute threshold that was applied.
    """

    U: NDArray[np.float64]
    singular_values: NDArray[np.float64]
    V: NDArray[np.float64]
    rank_tolerance: float

    @property
    def numeric_rank(self) -> int:
        return int(self.singular_values.size)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.U.shape[0], self.V.shape[0])

    def reconstruct(self) -> NDArray[np.float64]:
        return (self.U * self.singular_values) @ self.V.T

    def range_projector(self) -> NDArray[np.float64]:
        """Orthogonal projector ``U U^T`` onto the column space."""
        return self.U @ self.U.T


def _raw_svd(a: NDArray[np.float64]):
    try:
        return np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc


def svd(m: ArrayLike, rtol: float = RTOL) -> SvdFactors:
    """Economic SVD of ``m`` keeping singular values ``> rtol * sigma_max``.

    A zero matrix yields rank 0 with empty ``U`` (m x 0) and ``V`` (n x 0).
    """
    if rtol < 0:
        raise InvalidInputError("rank tolerance must be non-negative")
    a = as_matrix(m)
    rows, cols = a.shape
    if a.size == 0:
        return SvdFactors(np.zeros((rows, 0)), np.zeros(0), np.zeros((cols, 0)), 0.0)
    u, s, vt = _raw_svd(a)
    cutoff = rtol * s[0] if s.size else 0.0
    r = int(np.count_nonzero(s > cutoff))
    return SvdFactors(u[:, :r].copy(), s[:r].copy(), vt[:r].T.copy(), float(cutoff))


def pseudo_inverse(m: ArrayLike, rtol: float = RTOL) -> NDArray[np.float64]:
    """Moore-Penrose pseudo-inverse ``V diag(1/sigma) U^T`` of the truncated SVD.

    Singular values at or below the tolerance are treated as exact zeros and
    stay zero in the inverse, so rank-deficient inputs never fail.
    """
    f = svd(m, rtol)
    return (f.V / f.singular_values) @ f.U.T


def numeric_rank(m: ArrayLike, rtol: float = RTOL) -> int:
    """Number of singular values exceeding ``rtol * sigma_max``."""
    a = as_matrix(m)
    if a.size == 0:
        return 0
    try:
        s = np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    return int(np.count_nonzero(s > rtol * s[0]))


def spectral_norm(m: ArrayLike) -> float:
    a = as_matrix(m)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def frobenius_norm(m: ArrayLike) -> float:
    a = as_matrix(m)
    return float(np.sqrt(np.sum(a * a)))


def is_symmetric(m: ArrayLike, tol: float = SYM_TOL) -> bool:
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        return False
    scale = frobenius_norm(a)
    return frobenius_norm(a - a.T) <= tol * max(scale, np.finfo(float).tiny)


def symmetric_eigendecomposition(
    m: ArrayLike,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix.

    Raises InvalidInputError when ``m`` is not square or not symmetric to
    ``SYM_TOL`` relative Frobenius norm.
    """
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"matrix must be square, got {a.shape}")
    if not is_symmetric(a):
        raise InvalidInputError("matrix is not symmetric")
    try:
        w, q = np.linalg.eigh(0.5 * (a + a.T))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition did not converge: {exc}") from exc
    return w, q


def orthonormal_complement(basis: NDArray[np.float64]) -> NDArray[np.float64]:
    """Orthonormal basis of the orthogonal complement of ``span(basis)``.

    ``basis`` must already have orthonormal columns (n x r); returns n x (n - r).
    """
    n, r = basis.shape
    if r == 0:
        return np.eye(n)
    q, _ = np.linalg.qr(basis, mode="complete")
    comp = q[:, r:]
    # one projection sweep keeps the complement orthogonal to `basis` at eps level
    comp = comp - basis @ (basis.T @ comp)
    q2, _ = np.linalg.qr(comp)
    return q2
