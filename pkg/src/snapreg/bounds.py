"""Spectral predictions for symmetric systems, checked against regression runs.

For symmetric A the regression error is governed by the eigenvalue
multiplicities: with all eigenvalues simple the Frobenius error obeys an
explicit bound while the data has fewer columns than the dimension, the
snapshot rank saturates at the number ``s`` of distinct eigenvalues, and
once it does, the error equals the repeated eigenvalues exactly (spectral
norm ``lambda_star``, squared Frobenius norm ``sum (m - 1) lambda**2``).

Functions raise :class:`PreconditionError` when their hypotheses fail; the
message is the reason that ends up in a :class:`BoundReport`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from snapreg.errors import PreconditionError
from snapreg.linalg import SvdFactors, as_vector, orthonormal_complement
from snapreg.regression import ErrorCertificate, RegressionState
from snapreg.system import COEF_RTOL, InitialCondition, LtiSystem, SpectralProfile

# hypothesis names used as "inapplicable" reasons
NOT_SYMMETRIC = "system not symmetric"
NOT_SIMPLE = "repeated eigenvalues present"
ALL_SIMPLE = "all eigenvalues simple"
NOT_GENERIC = "x0 orthogonal to an eigenspace"
K_AT_LEAST_N = "k >= n"
K_BELOW_S = "k < s"


@dataclass(frozen=True)
class FrobeniusBound:
    """Upper bound on ``||A - A_hat_k||_F**2`` for simple-spectrum symmetric A.

    ``squared`` uses the singular-value reading (largest |eigenvalue| and
    smallest nonzero |eigenvalue|); ``literal_squared`` uses the algebraic
    largest and smallest eigenvalues, which can fail for indefinite A.
    """

    squared: float
    literal_squared: float
    data_rank: int

    @property
    def value(self) -> float:
        return math.sqrt(max(self.squared, 0.0))


def frobenius_error_bound(profile: SpectralProfile, ic: InitialCondition, k: int) -> FrobeniusBound:
    if not profile.all_simple:
        raise PreconditionError(NOT_SIMPLE)
    n = profile.n
    if k >= n:
        raise PreconditionError(K_AT_LEAST_N)
    data_rank = min(k, ic.nnz_nu + min(ic.nnz_mu, 1))
    lam = profile.eigenvalues
    mags = np.abs(profile.nonzero_eigenvalues)
    sig_max = float(mags.max())
    sig_min = float(mags.min())
    return FrobeniusBound(
        squared=(n - data_rank) * sig_max**2 - sig_min**2,
        literal_squared=(n - data_rank) * float(lam.max()) ** 2 - float(lam.min()) ** 2,
        data_rank=data_rank,
    )


def predicted_rank(profile: SpectralProfile, k: int) -> int:
    """Rank of ``X_k`` for generic x0: ``min(k + 1, s)``."""
    return min(k + 1, profile.s)


def is_generic(profile: SpectralProfile, x0: ArrayLike) -> bool:
    """True when x0 has a nonzero component in every eigenspace of A."""
    x = as_vector(x0)
    thresh = COEF_RTOL * float(np.linalg.norm(x))
    for i in range(profile.s):
        E = profile.eigenspace(i)
        if np.linalg.norm(E.T @ x) <= thresh:
            return False
    return True


def repeated_eigenvalue_error(profile: SpectralProfile) -> tuple[float, float]:
    """Saturated error ``(spectral, frobenius)`` for a spectrum with repeats."""
    reps = [(v, m) for v, m in zip(profile.distinct_values, profile.multiplicities) if m > 1]
    if not reps:
        raise PreconditionError(ALL_SIMPLE)
    spectral = max(abs(v) for v, _ in reps)
    frob = math.sqrt(sum((m - 1) * v * v for v, m in reps))
    return float(spectral), frob


@dataclass(frozen=True)
class PartitionBlock:
    value: float
    multiplicity: int
    eigenvectors: NDArray[np.float64] = field(repr=False)
    nullspace_basis: NDArray[np.float64] = field(repr=False)

    @property
    def P(self) -> NDArray[np.float64]:
        return self.nullspace_basis.T @ self.eigenvectors


@dataclass(frozen=True)
class MultiplicityPartition:
    """Left-nullspace of the saturated data, split by repeated eigenvalue.

    ``Q1`` holds one eigenvector per distinct eigenvalue, chosen as the
    direction of x0 inside that eigenspace; ``U2`` is an orthonormal basis
    of the complement of the data range.
    """

    Lambda1: NDArray[np.float64]
    Q1: NDArray[np.float64] = field(repr=False)
    U2: NDArray[np.float64] = field(repr=False)
    blocks: tuple[PartitionBlock, ...]

    @property
    def ell(self) -> int:
        return len(self.blocks)

    def block_diagonal(self) -> NDArray[np.float64]:
        """``U2'^T Q2`` with rows and columns grouped per block."""
        rows = sum(b.multiplicity - 1 for b in self.blocks)
        cols = sum(b.multiplicity for b in self.blocks)
        out = np.zeros((rows, cols))
        r = c = 0
        for b in self.blocks:
            out[r : r + b.multiplicity - 1, c : c + b.multiplicity] = b.P
            r += b.multiplicity - 1
            c += b.multiplicity
        return out

    def error_operator(self) -> NDArray[np.float64]:
        """``sum_i lambda_i U2'^i U2'^i^T``, which equals ``A - A_hat`` once saturated."""
        n = self.U2.shape[0]
        out = np.zeros((n, n))
        for b in self.blocks:
            out += b.value * (b.nullspace_basis @ b.nullspace_basis.T)
        return out


def _aligned_eigenspace(E: NDArray[np.float64], x0: NDArray[np.float64]) -> NDArray[np.float64]:
    """Orthonormal basis of span(E) whose first column is x0 projected into it."""
    c = E.T @ x0
    norm = float(np.linalg.norm(c))
    if norm <= COEF_RTOL * float(np.linalg.norm(x0)):
        raise PreconditionError(NOT_GENERIC)
    c = c / norm
    rest = orthonormal_complement(c[:, None])
    return E @ np.column_stack([c, rest])


def multiplicity_partition(
    profile: SpectralProfile, svd_Xk: SvdFactors, ic: InitialCondition | ArrayLike
) -> MultiplicityPartition:
    if svd_Xk.numeric_rank != profile.s:
        raise PreconditionError(
            f"rank(X_k) = {svd_Xk.numeric_rank} differs from s = {profile.s}"
        )
    x0 = ic.x0 if isinstance(ic, InitialCondition) else as_vector(ic, "x0")
    U2 = orthonormal_complement(svd_Xk.U)
    reps = []
    blocks = []
    for i, (value, m) in enumerate(zip(profile.distinct_values, profile.multiplicities)):
        basis = _aligned_eigenspace(profile.eigenspace(i), x0)
        reps.append(basis[:, 0])
        if m == 1:
            continue
        E = profile.eigenspace(i)
        projected = E @ (E.T @ U2)
        u, _, _ = np.linalg.svd(projected, full_matrices=False)
        blocks.append(PartitionBlock(float(value), m, basis, u[:, : m - 1]))
    return MultiplicityPartition(
        Lambda1=np.asarray(profile.distinct_values, dtype=float),
        Q1=np.column_stack(reps),
        U2=U2,
        blocks=tuple(blocks),
    )


def lemma3_residual(U2: NDArray[np.float64], Q1: NDArray[np.float64]) -> float:
    """``||U2^T Q1||_F``: zero when the data range contains every representative eigenvector."""
    if U2.size == 0 or Q1.size == 0:
        return 0.0
    return float(np.linalg.norm(U2.T @ Q1))


@dataclass
class BoundReport:
    """Per-step predictions next to the measured error.

    A field is ``None`` exactly when its hypotheses fail; ``inapplicable``
    maps the field name to the failed hypothesis.
    """

    k: int
    observed_rank: int
    empirical_spectral: float
    empirical_frobenius: float
    predicted_rank: int | None = None
    thm2_bound: float | None = None
    thm2_bound_literal: float | None = None
    lambda_star: float | None = None
    thm4_spectral_prediction: float | None = None
    thm4_frobenius_prediction: float | None = None
    lemma3_residual: float | None = None
    inapplicable: dict[str, str] = field(default_factory=dict)


def bound_report(
    truth: LtiSystem,
    ic: InitialCondition | None,
    state: RegressionState,
    certificate: ErrorCertificate,
) -> BoundReport | None:
    """Join every applicable prediction for the current step; ``None`` at k = 0."""
    if state.k < 1:
        return None
    k = state.k
    rep = BoundReport(
        k=k,
        observed_rank=state.rank,
        empirical_spectral=certificate.empirical_spectral,
        empirical_frobenius=certificate.empirical_frobenius,
    )
    spectral_fields = (
        "predicted_rank",
        "thm2_bound",
        "lambda_star",
        "thm4_spectral_prediction",
        "thm4_frobenius_prediction",
        "lemma3_residual",
    )
    prof = truth.profile
    if prof is None or ic is None:
        reason = NOT_SYMMETRIC if prof is None else "initial condition not decomposed"
        rep.inapplicable.update(dict.fromkeys(spectral_fields, reason))
        return rep

    generic = is_generic(prof, ic.x0)
    if generic:
        rep.predicted_rank = predicted_rank(prof, k)
    else:
        rep.inapplicable["predicted_rank"] = NOT_GENERIC

    try:
        fb = frobenius_error_bound(prof, ic, k)
        rep.thm2_bound = fb.squared
        rep.thm2_bound_literal = fb.literal_squared
    except PreconditionError as exc:
        rep.inapplicable["thm2_bound"] = str(exc)

    rep.lambda_star = prof.lambda_star
    if rep.lambda_star is None:
        rep.inapplicable["lambda_star"] = ALL_SIMPLE

    if prof.all_simple:
        rep.inapplicable["thm4_spectral_prediction"] = ALL_SIMPLE
        rep.inapplicable["thm4_frobenius_prediction"] = ALL_SIMPLE
    elif k < prof.s:
        rep.inapplicable["thm4_spectral_prediction"] = K_BELOW_S
        rep.inapplicable["thm4_frobenius_prediction"] = K_BELOW_S
    else:
        rep.thm4_spectral_prediction, rep.thm4_frobenius_prediction = repeated_eigenvalue_error(prof)

    if k < prof.s:
        rep.inapplicable["lemma3_residual"] = K_BELOW_S
    elif not generic:
        rep.inapplicable["lemma3_residual"] = NOT_GENERIC
    else:
        try:
            part = multiplicity_partition(prof, state.svd_current, ic)
            rep.lemma3_residual = lemma3_residual(part.U2, part.Q1)
        except PreconditionError as exc:
            rep.inapplicable["lemma3_residual"] = str(exc)
    return rep
