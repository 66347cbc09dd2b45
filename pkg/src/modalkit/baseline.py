"""Reference estimator: pencil solves over a grid of data lengths and
truncation orders, with BIC model-order selection, plus the relative-error
metrics used for benchmark scoring.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import ModalModel
from .pencil import (
    RankCollapseWarning,
    _modes_from_right_factor,
    _numerical_rank,
    build_data_matrix,
    vandermonde,
    weights_ls,
)

__all__ = [
    "GridSearchResult",
    "ErrorRecord",
    "bic_score",
    "gpof_grid_search",
    "relative_error",
    "mse_aggregate",
]


@dataclass(frozen=True)
class GridSearchResult:
    """Winning grid point of the BIC search.

    ``m_ott`` is the number of leading samples the modes were estimated from;
    ``p_ott`` is the size of the selected model.  ``grid_scores`` lists, for
    every (m, p_hat) pencil examined, the best truncated model found there as
    a dict with keys m, p_hat, p, bic.
    """

    m_ott: int
    p_ott: int
    model: ModalModel
    bic: float
    grid_scores: tuple


@dataclass(frozen=True)
class ErrorRecord:
    """Relative error of one replication; e = -1 encodes an under-estimated
    order (p_ott < true p)."""

    e: float
    p_ott: int
    sigma: float


def _bic_from_rss(rss: float, n: int, k: int) -> float:
    if rss <= 0.0:
        return -math.inf
    m = 2 * n  # real observations: re and im of every sample
    return m * math.log(rss / m) + k * math.log(m)


def bic_score(a, model: ModalModel) -> float:
    """Bayesian information criterion of a modal fit to the samples.

    RSS sums squared residuals over real and imaginary parts (2n real
    observations); each complex mode contributes 4 real parameters.  A perfect
    fit (RSS = 0) scores -inf.  Lower is better.
    """
    a = np.asarray(a, dtype=complex)
    if model.p < 1:
        raise ValueError("model must have at least one mode")
    V = vandermonde(np.asarray(model.xi), a.size)
    rss = float(np.linalg.norm(V @ np.asarray(model.c) - a) ** 2)
    return _bic_from_rss(rss, a.size, 4 * model.p)


def _sorted_by_weight(zeta: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    order = np.lexsort((np.angle(zeta), -np.abs(zeta), -np.abs(gamma)))
    return zeta[order]


def gpof_grid_search(a) -> GridSearchResult:
    """Search data lengths m and truncation orders p_hat, selecting by BIC.

    For each m in ceil(n/3)..n the pencil estimator runs on the first m
    samples with l = floor(m/2) and p_hat in ceil(l/3)..floor(l/2).  Every
    pencil solution is also scored at each truncation that keeps only its
    top-j modes by |weight| (weights re-fit on the full record), so the
    selected order can fall below the pencil grid; weights and BIC always use
    all n samples, keeping scores comparable across m.

    Raises
    ------
    ValueError
        If every grid point fails to produce a model.
    """
    a = np.asarray(a, dtype=complex)
    n = a.size
    if n < 6:
        raise ValueError("grid search needs at least 6 samples")
    best = None
    scores = []
    for m in range(math.ceil(n / 3), n + 1):
        l = m // 2
        p_lo, p_hi = math.ceil(l / 3), l // 2
        if p_lo < 1 or p_hi < p_lo:
            continue
        U = build_data_matrix(a[:m], l)
        _, s, Q = np.linalg.svd(U.matrix, full_matrices=False)
        rank = _numerical_rank(s, U.matrix.shape)
        for p_hat in range(p_lo, p_hi + 1):
            p_eff = min(p_hat, rank)
            if p_eff == 0:
                continue
            zeta = _modes_from_right_factor(Q, p_eff)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RankCollapseWarning)
                gamma, _ = weights_ls(a, zeta)
            zeta = _sorted_by_weight(zeta, gamma)
            best_here = None
            for j in range(1, zeta.size + 1):
                xi_j = zeta[:j]
                if len(set(xi_j.tolist())) < j:
                    continue
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RankCollapseWarning)
                    c_j, resid = weights_ls(a, xi_j)
                bic = _bic_from_rss(resid**2, n, 4 * j)
                cand = (bic, m, j, xi_j, c_j)
                if best_here is None or bic < best_here[0]:
                    best_here = cand
                if best is None or bic < best[0]:
                    best = cand
            if best_here is not None:
                scores.append(
                    {
                        "m": m,
                        "p_hat": p_hat,
                        "p": best_here[2],
                        "bic": best_here[0],
                    }
                )
    if best is None:
        raise ValueError("no grid point produced a model")
    bic, m_ott, p_ott, xi, c = best
    order = np.lexsort((np.angle(xi), -np.abs(xi), -np.abs(c)))
    model = ModalModel(c=tuple(c[order]), xi=tuple(xi[order]))
    return GridSearchResult(
        m_ott=m_ott,
        p_ott=p_ott,
        model=model,
        bic=bic,
        grid_scores=tuple(scores),
    )


def _weight_sorted(model: ModalModel):
    c = np.asarray(model.c)
    xi = np.asarray(model.xi)
    order = np.lexsort((np.angle(xi), -np.abs(xi), -np.abs(c)))
    return c[order], xi[order]


def relative_error(
    truth: ModalModel, est: ModalModel | None, sigma: float = 0.0
) -> ErrorRecord:
    """Index-wise relative error after sorting both models by descending |c|.

    E = sum_j |c_j - c_hat_j|^2 / sum_j |c_j|^2
      + sum_j |xi_j - xi_hat_j|^2 / sum_j |xi_j|^2

    over the first p (true) modes.  If the estimate has fewer modes than the
    truth, E is the sentinel -1.  ``sigma`` is carried through as the case
    label of the record.
    """
    p = truth.p
    p_ott = est.p if est is not None else 0
    if est is None or p_ott < p:
        return ErrorRecord(e=-1.0, p_ott=p_ott, sigma=sigma)
    ct, xt = _weight_sorted(truth)
    ce, xe = _weight_sorted(est)
    ce, xe = ce[:p], xe[:p]
    e = float(
        np.sum(np.abs(ct - ce) ** 2) / np.sum(np.abs(ct) ** 2)
        + np.sum(np.abs(xt - xe) ** 2) / np.sum(np.abs(xt) ** 2)
    )
    return ErrorRecord(e=e, p_ott=p_ott, sigma=sigma)


def mse_aggregate(records) -> tuple[float | None, int]:
    """Average the nonnegative errors; N_sigma counts them.

    Returns (None, 0) when every record carries the -1 sentinel.
    """
    valid = [r.e for r in records if r.e >= 0.0]
    n_sigma = len(valid)
    if n_sigma == 0:
        return None, 0
    return float(np.mean(valid)), n_sigma
