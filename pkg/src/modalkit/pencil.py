"""Hankel pencils: exact complex-exponential interpolation, Cadzow structured
denoising, and the SVD-truncated pencil estimator.

The data matrix of n samples with pencil parameter l is the (n-l) x (l+1)
Hankel matrix U[i, j] = a[i+j].  Dropping its last/first column gives the
shifted pair U0/U1 whose generalized eigenvalues are the interpolation nodes.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "HankelDataMatrix",
    "PencilSolution",
    "CadzowResult",
    "SingularPencilError",
    "RankCollapseWarning",
    "build_data_matrix",
    "ceip_square",
    "cadzow",
    "gpof",
    "weights_ls",
    "vandermonde",
]

# Pencils with a shifted factor conditioned worse than this are treated as
# singular; above _WELL_CONDITIONED the square solve is replaced by QZ.
_COND_SINGULAR = 1e12
_WELL_CONDITIONED = 1e8


class SingularPencilError(np.linalg.LinAlgError):
    """The square pencil is numerically singular (det U0 or det U1 ~ 0)."""


class RankCollapseWarning(UserWarning):
    """Numerical rank fell below the requested order; fewer modes returned."""


@dataclass(frozen=True)
class HankelDataMatrix:
    """Hankel data matrix with its provenance (source length n, parameter l)."""

    matrix: np.ndarray
    n: int
    l: int

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=complex))

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]

    def shifted_pair(self) -> tuple[np.ndarray, np.ndarray]:
        """(U0, U1): the matrix without its last / first column."""
        return self.matrix[:, :-1], self.matrix[:, 1:]


@dataclass(frozen=True)
class PencilSolution:
    """Modes and weights recovered from a pencil, ordered by descending |gamma|.

    ``residual`` is ||V(zeta) gamma - a||_2 on the data the solution was
    computed from.
    """

    zeta: np.ndarray
    gamma: np.ndarray
    residual: float

    def __post_init__(self):
        object.__setattr__(self, "zeta", np.asarray(self.zeta, dtype=complex))
        object.__setattr__(self, "gamma", np.asarray(self.gamma, dtype=complex))
        if self.zeta.shape != self.gamma.shape:
            raise ValueError("zeta and gamma must have equal length")

    @property
    def order(self) -> int:
        return self.zeta.size


@dataclass(frozen=True)
class CadzowResult:
    matrix: HankelDataMatrix
    iterations: int
    change_norms: tuple

    @property
    def final_change(self) -> float:
        return self.change_norms[-1] if self.change_norms else 0.0


def build_data_matrix(a, l: int) -> HankelDataMatrix:
    """Arrange samples into the (n-l) x (l+1) Hankel data matrix."""
    a = np.asarray(a, dtype=complex)
    n = a.size
    if not 1 <= l <= n - 1:
        raise ValueError(f"pencil parameter l={l} outside [1, {n - 1}]")
    U = scipy.linalg.hankel(a[: n - l], a[n - l - 1 :])
    return HankelDataMatrix(matrix=U, n=n, l=l)


def _sort_by_weight(zeta: np.ndarray, gamma: np.ndarray):
    """Order modes by descending |gamma|, ties by descending |zeta| then angle."""
    key = np.lexsort((np.angle(zeta), -np.abs(zeta), -np.abs(gamma)))
    return zeta[key], gamma[key]


def vandermonde(xi, n: int) -> np.ndarray:
    """The n x p matrix V[k, j] = xi_j**k."""
    xi = np.asarray(xi, dtype=complex)
    return xi[None, :] ** np.arange(n)[:, None]


def weights_ls(a, xi) -> tuple[np.ndarray, float]:
    """Least-squares weights gamma = argmin ||V(xi) gamma - a||_2.

    Solved through an orthogonal factorization of the Vandermonde matrix; a
    numerically rank-deficient V yields the minimum-norm solution and a
    RankCollapseWarning.

    Returns
    -------
    gamma : np.ndarray
    residual : float
    """
    a = np.asarray(a, dtype=complex)
    xi = np.asarray(xi, dtype=complex)
    if xi.size > a.size:
        raise ValueError("more modes than samples")
    if xi.size == 0:
        return xi.copy(), float(np.linalg.norm(a))
    V = vandermonde(xi, a.size)
    gamma, _, rank, _ = np.linalg.lstsq(V, a, rcond=None)
    if rank < xi.size:
        warnings.warn(
            f"Vandermonde numerically rank-deficient ({rank} < {xi.size}); "
            "minimum-norm weights returned",
            RankCollapseWarning,
        )
    residual = float(np.linalg.norm(V @ gamma - a))
    return gamma, residual


def ceip_square(a) -> PencilSolution:
    """Interpolate n samples exactly by n/2 complex exponentials.

    The nodes are the generalized eigenvalues of the square Hankel pencil
    U1 - z*U0 of order n/2; the weights then solve V(zeta) gamma = a.

    Raises
    ------
    SingularPencilError
        If U0 or U1 has condition number above 1e12.
    """
    a = np.asarray(a, dtype=complex)
    n = a.size
    if n < 2 or n % 2:
        raise ValueError("ceip_square needs an even number of samples")
    U0, U1 = build_data_matrix(a, n // 2).shifted_pair()
    cond0 = np.linalg.cond(U0)
    cond1 = np.linalg.cond(U1)
    if not (cond0 < _COND_SINGULAR and cond1 < _COND_SINGULAR):
        raise SingularPencilError(
            f"square pencil numerically singular (cond U0={cond0:.2e}, "
            f"cond U1={cond1:.2e})"
        )
    if cond0 < _WELL_CONDITIONED:
        zeta = np.linalg.eigvals(np.linalg.solve(U0, U1))
    else:
        zeta = scipy.linalg.eigvals(U1, U0)
    gamma, residual = weights_ls(a, zeta)
    zeta, gamma = _sort_by_weight(zeta, gamma)
    return PencilSolution(zeta=zeta, gamma=gamma, residual=residual)


def _hankel_average(A: np.ndarray) -> np.ndarray:
    """Project onto Hankel matrices by averaging the anti-diagonals."""
    r, c = A.shape
    idx = np.add.outer(np.arange(r), np.arange(c))
    sums = np.zeros(r + c - 1, dtype=complex)
    np.add.at(sums, idx, A)
    counts = np.bincount(idx.ravel(), minlength=r + c - 1)
    means = sums / counts
    return means[idx]


def _svd_truncate(A: np.ndarray, rank: int) -> np.ndarray:
    P, s, Q = np.linalg.svd(A, full_matrices=False)
    k = min(rank, s.size)
    return (P[:, :k] * s[:k]) @ Q[:k]


def cadzow(
    U: HankelDataMatrix, p: int, max_iter: int = 10, eta: float = 1e-8
) -> CadzowResult:
    """Alternate rank-p SVD truncation with anti-diagonal averaging.

    Stops when the Frobenius norm of the update falls below eta or after
    max_iter sweeps; non-convergence is reported through the diagnostics, not
    as an error.  The returned matrix is exactly Hankel.
    """
    if p < 1 or p > min(U.rows, U.cols):
        raise ValueError(f"target rank {p} outside [1, {min(U.rows, U.cols)}]")
    if eta <= 0:
        raise ValueError("eta must be positive")
    current = U.matrix
    changes = []
    iterations = 0
    for _ in range(max_iter):
        nxt = _hankel_average(_svd_truncate(current, p))
        iterations += 1
        change = float(np.linalg.norm(nxt - current))
        changes.append(change)
        current = nxt
        if change < eta:
            break
    return CadzowResult(
        matrix=HankelDataMatrix(matrix=current, n=U.n, l=U.l),
        iterations=iterations,
        change_norms=tuple(changes),
    )


def _numerical_rank(s: np.ndarray, shape: tuple[int, int]) -> int:
    if s.size == 0 or s[0] == 0.0:
        return 0
    tol = max(shape) * np.finfo(float).eps * s[0]
    return int(np.count_nonzero(s > tol))


def _modes_from_right_factor(Q: np.ndarray, p_eff: int) -> np.ndarray:
    """Modes as eigenvalues of pinv(Q0t) @ Q1t built from the leading p_eff
    rows of the SVD right factor.

    Plain transposition, not conjugate: left null vectors y of the reduced
    pencil satisfy y.T (QF E1 - z QF E0) = 0, so transposing keeps the
    rank-reducing numbers themselves (a conjugate transpose would return
    their conjugates).
    """
    QF = Q[:p_eff]
    Q0t = QF[:, :-1].T
    Q1t = QF[:, 1:].T
    M, *_ = np.linalg.lstsq(Q0t, Q1t, rcond=None)
    return np.linalg.eigvals(M)


def gpof(a, l: int, p_hat: int) -> PencilSolution:
    """Pencil estimator with SVD rank truncation.

    Builds the data matrix for pencil parameter l, keeps the leading p_hat
    right singular vectors and extracts the modes as the eigenvalues of the
    reduced p_hat x p_hat shift problem.  Weights come from ``weights_ls`` on
    the same samples.

    If the numerical rank of the data matrix is below p_hat, a
    RankCollapseWarning is issued and only rank-many modes are returned.
    """
    a = np.asarray(a, dtype=complex)
    n = a.size
    if not (1 <= p_hat <= l and 2 * l <= n):
        raise ValueError(f"need p_hat <= l <= n/2, got p_hat={p_hat} l={l} n={n}")
    U = build_data_matrix(a, l)
    _, s, Q = np.linalg.svd(U.matrix, full_matrices=False)
    rank = _numerical_rank(s, U.matrix.shape)
    p_eff = min(p_hat, rank)
    if p_eff < p_hat:
        warnings.warn(
            f"data matrix has numerical rank {rank} < p_hat={p_hat}; "
            f"returning {p_eff} modes",
            RankCollapseWarning,
        )
    if p_eff == 0:
        return PencilSolution(
            zeta=np.empty(0, complex),
            gamma=np.empty(0, complex),
            residual=float(np.linalg.norm(a)),
        )
    zeta = _modes_from_right_factor(Q, p_eff)
    gamma, residual = weights_ls(a, zeta)
    zeta, gamma = _sort_by_weight(zeta, gamma)
    return PencilSolution(zeta=zeta, gamma=gamma, residual=residual)
