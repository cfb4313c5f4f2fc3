"""Online least-squares regression of a linear map from streamed snapshots.

The estimate after step k is ``A_hat = Y_k @ pinv(X_k)``. Given the true
matrix, :func:`error_certificate` evaluates the exact multiplicative error
operator ``E`` with ``A_hat = A (I - E)``, built only from the previous data
range and the newest snapshot, together with its spectral-norm bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from snapreg.errors import InvalidInputError, PreconditionError
from snapreg.linalg import RTOL, SvdFactors, as_vector, frobenius_norm, spectral_norm, svd
from snapreg.system import InitialCondition, LtiSystem, SnapshotLog

#: A step is degenerate when ``Tr(S P) <= DEGENERACY_RTOL * ||x_k||^2``.
DEGENERACY_RTOL = 1e-12


def _estimate_from(Y: NDArray[np.float64], f: SvdFactors) -> NDArray[np.float64]:
    # same operation order as pseudo_inverse() so batch and online fits agree bitwise
    return Y @ ((f.V / f.singular_values) @ f.U.T)


def fit_batch(log: SnapshotLog, rtol: float = RTOL) -> NDArray[np.float64]:
    """Least-squares estimate ``Y_k X_k^+`` from a complete log."""
    return _estimate_from(log.Y, svd(log.X, rtol))


@dataclass
class RegressionState:
    """Running estimate fed one snapshot at a time.

    The state owns the trajectory ``x0 .. x_{k+1}``; each :meth:`ingest`
    appends the next state, so X gains the previous newest column and Y the
    new one. The SVD is recomputed from scratch at every step.
    """

    log: SnapshotLog
    rtol: float = RTOL
    svd_current: SvdFactors = field(init=False, repr=False)
    svd_prev: SvdFactors | None = field(init=False, default=None, repr=False)
    estimate: NDArray[np.float64] = field(init=False, repr=False)
    rank_history: list[int] = field(init=False, default_factory=list)

    def __post_init__(self) -> None:
        states = self.log.states
        self.log = SnapshotLog(states[:, :2].copy())
        self._refresh()
        for j in range(2, states.shape[1]):
            self.ingest(states[:, j])

    @classmethod
    def start(cls, x0: ArrayLike, x1: ArrayLike, rtol: float = RTOL) -> "RegressionState":
        a, b = as_vector(x0, "x0"), as_vector(x1, "x1")
        if a.size != b.size:
            raise InvalidInputError("x0 and x1 differ in length")
        return cls(SnapshotLog(np.column_stack([a, b])), rtol)

    @property
    def k(self) -> int:
        return self.log.k

    @property
    def n(self) -> int:
        return self.log.n

    @property
    def rank(self) -> int:
        return self.svd_current.numeric_rank

    def _refresh(self) -> None:
        self.svd_current = svd(self.log.X, self.rtol)
        self.estimate = _estimate_from(self.log.Y, self.svd_current)
        self.rank_history.append(self.svd_current.numeric_rank)

    def ingest(self, x_next: ArrayLike) -> "RegressionState":
        x = as_vector(x_next, "x_next")
        if x.size != self.n:
            raise InvalidInputError(f"snapshot has length {x.size}, expected {self.n}")
        self.log = SnapshotLog(np.column_stack([self.log.states, x]))
        self.svd_prev = self.svd_current
        self._refresh()
        return self

    def residual(self) -> float:
        """Fit residual ``||Y_k - A_hat X_k||_F``."""
        return frobenius_norm(self.log.Y - self.estimate @ self.log.X)


def ingest_snapshot(state: RegressionState, x_next: ArrayLike) -> RegressionState:
    return state.ingest(x_next)


@dataclass(frozen=True)
class ErrorCertificate:
    """Error decomposition of the estimate at step ``k``.

    ``E``, ``thm1_bound`` and ``identity_residual`` are ``None`` on
    degenerate steps, where the newest snapshot adds nothing outside the
    previous data range.
    """

    k: int
    S: NDArray[np.float64] = field(repr=False)
    P: NDArray[np.float64] = field(repr=False)
    trace_SP: float
    degenerate: bool
    E: NDArray[np.float64] | None = field(repr=False)
    thm1_bound: float | None
    empirical_spectral: float
    empirical_frobenius: float
    absolute_error: NDArray[np.float64] = field(repr=False)
    identity_residual: float | None = None

    @property
    def error_operator_norm(self) -> float | None:
        return None if self.E is None else spectral_norm(self.E)


def error_certificate(state: RegressionState, truth: LtiSystem | ArrayLike) -> ErrorCertificate:
    if state.k < 1 or state.svd_prev is None:
        raise PreconditionError("an error certificate needs k >= 1")
    A = truth.A if isinstance(truth, LtiSystem) else np.asarray(truth, dtype=float)
    n = state.n
    U = state.svd_prev.U
    S = np.eye(n) - U @ U.T
    x_k = state.log.X[:, state.k]
    P = np.outer(x_k, x_k)
    SP = S @ P
    # S x_k with one reprojection sweep; Tr(S P) = ||S x_k||^2 since S is a projector
    w = x_k - U @ (U.T @ x_k)
    w -= U @ (U.T @ w)
    trace_SP = float(w @ w)
    diff = A - state.estimate
    degenerate = trace_SP <= DEGENERACY_RTOL * float(x_k @ x_k)
    E = bound = resid = None
    if not degenerate:
        M = np.eye(n) - SP / trace_SP
        # (I - S P / Tr) S expanded as S - w w^T / Tr: same operator, but the
        # literal product cancels terms of size ||x_k|| / ||S x_k|| in rounding
        E = S - np.outer(w, w) / trace_SP
        bound = spectral_norm(M)
        resid = frobenius_norm(A @ (np.eye(n) - E) - state.estimate)
    return ErrorCertificate(
        k=state.k,
        S=S,
        P=P,
        trace_SP=trace_SP,
        degenerate=degenerate,
        E=E,
        thm1_bound=bound,
        empirical_spectral=spectral_norm(diff),
        empirical_frobenius=frobenius_norm(diff),
        absolute_error=diff,
        identity_residual=resid,
    )


def lemma1_difference(
    truth: LtiSystem, ic: InitialCondition, state: RegressionState
) -> NDArray[np.float64] | None:
    """``A - A_hat`` rebuilt from the eigen-decomposition alone (no pseudo-inverse).

    Returns ``None`` when the projected snapshot ``S Q Lambda^k nu`` is
    numerically zero, i.e. the step is degenerate.
    """
    if truth.profile is None:
        raise PreconditionError("spectral error formula needs a symmetric system")
    if state.k < 1 or state.svd_prev is None:
        raise PreconditionError("spectral error formula needs k >= 1")
    prof = truth.profile
    n = state.n
    U = state.svd_prev.U
    S = np.eye(n) - U @ U.T
    x_k = prof.Q @ (prof.nonzero_eigenvalues**state.k * ic.nu)
    w = S @ x_k
    ww = float(w @ w)
    if ww <= DEGENERACY_RTOL * float(x_k @ x_k):
        return None
    return truth.A @ (np.eye(n) - np.outer(w, w) / ww) @ S
