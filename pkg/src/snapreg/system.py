"""Ground-truth linear systems, simulation and snapshot bookkeeping.

Systems evolve as ``x[t+1] = A @ x[t]`` from an initial state with no input.
Symmetric systems carry a :class:`SpectralProfile` whose eigenvector matrix
puts range eigenvectors first and nullspace eigenvectors last, which is the
ordering the bound analysis relies on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike, NDArray

from snapreg.errors import InvalidInputError
from snapreg.linalg import (
    RTOL,
    as_matrix,
    as_vector,
    is_symmetric,
    symmetric_eigendecomposition,
)

#: Two eigenvalues belong to the same cluster when ``|a - b| <= CLUSTER_RTOL * max(1, |a|)``.
CLUSTER_RTOL = 1e-8

#: Coefficients of x0 on eigenvectors count as nonzero above ``COEF_RTOL * ||x0||``.
COEF_RTOL = 1e-9

# Petersen graph, 1-based node labels: outer 5-cycle, inner pentagram, spokes i -- i+5.
PETERSEN_OUTER = ((1, 2), (2, 3), (3, 4), (4, 5), (5, 1))
PETERSEN_INNER = ((6, 8), (8, 10), (10, 7), (7, 9), (9, 6))
PETERSEN_SPOKE_WEIGHTS = {(1, 6): 1, (2, 7): 2, (3, 8): 3, (4, 9): 4, (5, 10): 5}


def cluster_eigenvalues(values: Sequence[float], rtol: float = CLUSTER_RTOL) -> list[list[int]]:
    """Group indices of ``values`` whose entries coincide under the cluster tolerance.

    Clusters are built by single linkage over the sorted values and returned
    in order of first appearance in ``values``.
    """
    vals = np.asarray(values, dtype=float)
    if vals.size == 0:
        return []
    order = np.argsort(vals, kind="stable")
    groups: list[list[int]] = [[int(order[0])]]
    for prev, cur in zip(order[:-1], order[1:]):
        a, b = vals[prev], vals[cur]
        if abs(b - a) <= rtol * max(1.0, abs(a)):
            groups[-1].append(int(cur))
        else:
            groups.append([int(cur)])
    for g in groups:
        g.sort()
    groups.sort(key=lambda g: g[0])
    return groups


@dataclass(frozen=True)
class SpectralProfile:
    """Eigen-structure of a symmetric system matrix.

    ``eigenvalues`` are sorted by decreasing magnitude, so the ``rank_r``
    nonzero ones come first and ``Q_full[:, :rank_r]`` spans the range of A
    while ``Q_full[:, rank_r:]`` spans its nullspace. ``clusters`` lists,
    per distinct eigenvalue, the column indices of its eigenvectors.
    """

    eigenvalues: NDArray[np.float64]
    Q_full: NDArray[np.float64]
    clusters: tuple[tuple[int, ...], ...]
    rank_r: int

    @classmethod
    def from_eigenpairs(
        cls,
        eigenvalues: ArrayLike,
        vectors: ArrayLike,
        cluster_rtol: float = CLUSTER_RTOL,
    ) -> "SpectralProfile":
        w = np.asarray(eigenvalues, dtype=float)
        q = as_matrix(vectors, "eigenvectors")
        if q.shape != (w.size, w.size):
            raise InvalidInputError("eigenvector matrix must be n x n for n eigenvalues")
        # decreasing magnitude; ties broken by value so the order is deterministic
        order = np.lexsort((-w, -np.abs(w)))
        w = w[order]
        q = q[:, order]
        scale = float(np.max(np.abs(w))) if w.size else 0.0
        rank_r = int(np.count_nonzero(np.abs(w) > RTOL * scale)) if scale > 0 else 0
        clusters = tuple(tuple(g) for g in cluster_eigenvalues(w, cluster_rtol))
        return cls(w, q, clusters, rank_r)

    @property
    def n(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def s(self) -> int:
        return len(self.clusters)

    @property
    def distinct_values(self) -> NDArray[np.float64]:
        return np.array([self.eigenvalues[list(g)].mean() for g in self.clusters])

    @property
    def multiplicities(self) -> tuple[int, ...]:
        return tuple(len(g) for g in self.clusters)

    @property
    def all_simple(self) -> bool:
        return all(len(g) == 1 for g in self.clusters)

    @property
    def lambda_star(self) -> float | None:
        """Largest |eigenvalue| among eigenvalues of multiplicity > 1, if any."""
        rep = [abs(v) for v, m in zip(self.distinct_values, self.multiplicities) if m > 1]
        return float(max(rep)) if rep else None

    @property
    def Q(self) -> NDArray[np.float64]:
        return self.Q_full[:, : self.rank_r]

    @property
    def Q_bar(self) -> NDArray[np.float64]:
        return self.Q_full[:, self.rank_r :]

    @property
    def nonzero_eigenvalues(self) -> NDArray[np.float64]:
        return self.eigenvalues[: self.rank_r]

    def eigenspace(self, cluster: int) -> NDArray[np.float64]:
        return self.Q_full[:, list(self.clusters[cluster])]


@dataclass(frozen=True)
class LtiSystem:
    A: NDArray[np.float64]
    symmetric: bool
    profile: SpectralProfile | None = None
    source: str = "matrix"

    @classmethod
    def from_matrix(cls, A: ArrayLike, source: str = "matrix") -> "LtiSystem":
        """Wrap a square matrix, computing a spectral profile when it is symmetric."""
        a = as_matrix(A, "A")
        if a.shape[0] != a.shape[1]:
            raise InvalidInputError(f"system matrix must be square, got {a.shape}")
        if is_symmetric(a):
            a = 0.5 * (a + a.T)
            w, q = symmetric_eigendecomposition(a)
            return cls(a, True, SpectralProfile.from_eigenpairs(w, q), source)
        return cls(a, False, None, source)

    @property
    def n(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class InitialCondition:
    """Coordinates of x0 in the eigenbasis: ``x0 = Q @ nu + Q_bar @ mu``."""

    x0: NDArray[np.float64]
    nu: NDArray[np.float64]
    mu: NDArray[np.float64]
    nnz_nu: int
    nnz_mu: int

    @property
    def alpha(self) -> NDArray[np.float64]:
        return np.concatenate([self.nu, self.mu])


@dataclass
class SnapshotLog:
    """Trajectory ``x0 .. x_{k+1}`` viewed as the shifted pair (X_k, Y_k)."""

    states: NDArray[np.float64] = field(repr=False)

    def __post_init__(self) -> None:
        self.states = as_matrix(self.states, "states")
        if self.states.shape[1] < 2:
            raise InvalidInputError("a snapshot log needs at least two states")

    @property
    def k(self) -> int:
        return self.states.shape[1] - 2

    @property
    def n(self) -> int:
        return self.states.shape[0]

    @property
    def X(self) -> NDArray[np.float64]:
        return self.states[:, :-1]

    @property
    def Y(self) -> NDArray[np.float64]:
        return self.states[:, 1:]

    def truncated(self, k: int) -> "SnapshotLog":
        """Log restricted to steps ``0..k``."""
        if not 0 <= k <= self.k:
            raise InvalidInputError(f"k={k} outside 0..{self.k}")
        return SnapshotLog(self.states[:, : k + 2].copy())


def simulate(system: LtiSystem | ArrayLike, x0: ArrayLike, steps: int) -> SnapshotLog:
    """Iterate ``x[t+1] = A x[t]`` and return the log with ``X = [x0 .. x_steps]``."""
    A = system.A if isinstance(system, LtiSystem) else as_matrix(system, "A")
    x = as_vector(x0, "x0")
    if x.size != A.shape[0]:
        raise InvalidInputError(f"x0 has length {x.size}, system has n={A.shape[0]}")
    if not np.any(x):
        raise InvalidInputError("x0 must be nonzero")
    if steps < 1:
        raise InvalidInputError("steps must be >= 1")
    states = np.empty((x.size, steps + 2))
    states[:, 0] = x
    for t in range(steps + 1):
        states[:, t + 1] = A @ states[:, t]
    return SnapshotLog(states)


def random_orthogonal(n: int, rng: np.random.Generator) -> NDArray[np.float64]:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    # sign fix makes the draw Haar-distributed and the map seed -> Q unique
    return q * np.where(np.diag(r) < 0, -1.0, 1.0)


def synthesize_symmetric(spectrum: Sequence[float], seed: int) -> LtiSystem:
    """Symmetric ``A = Q diag(spectrum) Q^T`` with a seeded random orthogonal Q.

    The profile is built from the requested spectrum itself, so repeated
    values are recognised exactly rather than by tolerance.
    """
    lam = np.asarray(spectrum, dtype=float)
    if lam.ndim != 1 or lam.size < 1:
        raise InvalidInputError("spectrum must be a nonempty list of reals")
    if not np.all(np.isfinite(lam)):
        raise InvalidInputError("spectrum contains NaN or Inf")
    q = random_orthogonal(lam.size, np.random.default_rng(seed))
    a = (q * lam) @ q.T
    a = 0.5 * (a + a.T)
    profile = SpectralProfile.from_eigenpairs(lam, q, cluster_rtol=0.0)
    return LtiSystem(a, True, profile, source=f"spectrum(seed={seed})")


def decompose_initial_condition(profile: SpectralProfile, x0: ArrayLike) -> InitialCondition:
    x = as_vector(x0, "x0")
    if x.size != profile.n:
        raise InvalidInputError(f"x0 has length {x.size}, profile has n={profile.n}")
    norm = float(np.linalg.norm(x))
    if norm == 0.0:
        raise InvalidInputError("x0 must be nonzero")
    alpha = profile.Q_full.T @ x
    nu = alpha[: profile.rank_r]
    mu = alpha[profile.rank_r :]
    thresh = COEF_RTOL * norm
    nnz_nu = int(np.count_nonzero(np.abs(nu) > thresh))
    nnz_mu = int(np.count_nonzero(np.abs(mu) > thresh))
    if nnz_nu == 0:
        raise InvalidInputError("x0 is orthogonal to the range of A (nu = 0)")
    return InitialCondition(x, nu, mu, nnz_nu, nnz_mu)


def weighted_petersen_laplacian() -> NDArray[np.float64]:
    """Laplacian ``D - W`` of the Petersen graph with spoke weights 1..5.

    Cycle and pentagram edges have weight 1; the spoke from node i to node
    i+5 has weight i. Built in integer arithmetic, so row sums are exactly 0.
    """
    W = np.zeros((10, 10), dtype=np.int64)
    for i, j in PETERSEN_OUTER + PETERSEN_INNER:
        W[i - 1, j - 1] = W[j - 1, i - 1] = 1
    for (i, j), w in PETERSEN_SPOKE_WEIGHTS.items():
        W[i - 1, j - 1] = W[j - 1, i - 1] = w
    L = np.diag(np.abs(W).sum(axis=1)) - W
    return L.astype(np.float64)


def discretize(generator: ArrayLike, dt: float, method: str = "expm") -> LtiSystem:
    """Discrete system for ``dx/dt = -L x`` sampled every ``dt``.

    ``method="expm"`` gives ``A = exp(-L dt)`` (Pade scaling-and-squaring);
    ``method="euler"`` gives the forward-Euler map ``A = I - dt L``.
    """
    L = as_matrix(generator, "generator")
    if L.shape[0] != L.shape[1]:
        raise InvalidInputError(f"generator must be square, got {L.shape}")
    if not (np.isfinite(dt) and dt > 0):
        raise InvalidInputError("dt must be a positive finite number")
    if method == "expm":
        A = scipy.linalg.expm(-dt * L)
    elif method == "euler":
        A = np.eye(L.shape[0]) - dt * L
    else:
        raise InvalidInputError(f"unknown discretization method {method!r}")
    if is_symmetric(L):
        A = 0.5 * (A + A.T)
    return LtiSystem.from_matrix(A, source=f"{method}(dt={dt})")


def _vander(values: ArrayLike, columns: int) -> NDArray[np.float64]:
    return np.vander(np.asarray(values, dtype=float), columns, increasing=True)


def vandermonde(distinct_eigenvalues: Sequence[float], columns: int) -> NDArray[np.float64]:
    """``V[i, j] = lambda_i ** j`` for pairwise distinct eigenvalues."""
    vals = np.asarray(distinct_eigenvalues, dtype=float)
    if columns < 1:
        raise InvalidInputError("columns must be >= 1")
    if len(cluster_eigenvalues(vals)) != vals.size:
        raise InvalidInputError("eigenvalues must be pairwise distinct")
    return _vander(vals, columns)


def structural_factorization(
    profile: SpectralProfile, ic: InitialCondition, k: int
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Return ``(Gamma, V)`` with ``X_k = Q_full @ Gamma @ V``.

    ``Gamma`` is the diagonal of eigen-coordinates of x0 and ``V`` the
    n x (k+1) Vandermonde matrix on all n eigenvalues (repeats included).
    """
    if k < 0:
        raise InvalidInputError("k must be >= 0")
    return np.diag(ic.alpha), _vander(profile.eigenvalues, k + 1)
