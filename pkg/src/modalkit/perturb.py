"""Stochastic-perturbation estimator: joint selection of the number of modes
and their parameters.

The data are first used to locate high-probability neighborhoods of the
eigenvalue condensed density.  T perturbed copies of the data (pseudosamples)
are then solved independently by the pencil estimator at an overestimated
order; the pooled eigenvalues are gated by the neighborhoods, clustered by
k-means seeded at the unperturbed solution, and clusters populated by almost
every pseudosample are accepted as modes.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, asdict, replace
from pathlib import Path

import numpy as np

from .density import RegionSet, condensed_density, extract_regions
from .model import Hyperparameters
from .pencil import RankCollapseWarning, gpof, weights_ls

__all__ = [
    "PseudosamplePool",
    "PooledEigenvalues",
    "Cluster",
    "ClusterSet",
    "EstimationReport",
    "gen_pseudosamples",
    "pool_eigenvalues",
    "gate_by_regions",
    "kmeans_cluster",
    "accept_clusters",
    "estimate",
]


@dataclass(frozen=True)
class PseudosamplePool:
    """T independently perturbed copies of the data (rows of ``samples``)."""

    samples: np.ndarray
    sigma_prime: float
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=complex))
        if self.samples.ndim != 2:
            raise ValueError("samples must be a T x n array")

    @property
    def T(self) -> int:
        return self.samples.shape[0]

    @property
    def n(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class PooledEigenvalues:
    """Eigenvalues pooled over pseudosamples, tagged by source index, with the
    matching interpolation weights."""

    points: np.ndarray
    sources: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=complex))
        object.__setattr__(self, "sources", np.asarray(self.sources, dtype=int))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=complex))
        if not (self.points.size == self.sources.size == self.weights.size):
            raise ValueError("points, sources and weights must align")

    def __len__(self) -> int:
        return self.points.size

    def subset(self, mask: np.ndarray) -> "PooledEigenvalues":
        return PooledEigenvalues(
            points=self.points[mask],
            sources=self.sources[mask],
            weights=self.weights[mask],
        )


@dataclass(frozen=True)
class Cluster:
    centroid: complex
    members: np.ndarray
    member_weights: np.ndarray
    accepted: bool = False

    @property
    def cardinality(self) -> int:
        return len(self.members)

    def mean(self) -> complex:
        return complex(np.mean(self.members)) if self.cardinality else self.centroid

    def spread(self) -> tuple[float, float]:
        """Standard deviation of member real and imaginary parts."""
        if self.cardinality == 0:
            return (0.0, 0.0)
        return (
            float(np.std(np.real(self.members))),
            float(np.std(np.imag(self.members))),
        )


@dataclass(frozen=True)
class ClusterSet:
    clusters: tuple
    init_centroids: np.ndarray
    discarded_points: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "init_centroids", np.asarray(self.init_centroids, dtype=complex)
        )
        object.__setattr__(
            self, "discarded_points", np.asarray(self.discarded_points, dtype=complex)
        )

    @property
    def p_ott(self) -> int:
        return sum(1 for c in self.clusters if c.accepted)

    def accepted(self) -> tuple:
        return tuple(c for c in self.clusters if c.accepted)


@dataclass(frozen=True)
class EstimationReport:
    """Outcome of the full pipeline: selected order, point estimates, spreads
    and diagnostics sufficient to reproduce the run."""

    p_ott: int
    xi_hat: tuple
    c_hat: tuple
    spread: tuple
    diagnostics: dict

    def to_json(self) -> str:
        def enc(z):
            return {"re": complex(z).real, "im": complex(z).imag}

        doc = {
            "p_ott": self.p_ott,
            "xi_hat": [enc(z) for z in self.xi_hat],
            "c_hat": [enc(z) for z in self.c_hat],
            "spread": [{"re_sd": s[0], "im_sd": s[1]} for s in self.spread],
            "diagnostics": self.diagnostics,
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())


def gen_pseudosamples(a, sigma_prime: float, T: int, seed: int) -> PseudosamplePool:
    """Perturb the data T times with i.i.d. complex Gaussian noise of s.d.
    sigma_prime (variance split evenly between real and imaginary parts)."""
    a = np.asarray(a, dtype=complex)
    if T < 1:
        raise ValueError("T must be >= 1")
    if sigma_prime < 0:
        raise ValueError("sigma_prime must be nonnegative")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((T, a.size, 2))
    nu = (sigma_prime / math.sqrt(2.0)) * (z[..., 0] + 1j * z[..., 1])
    return PseudosamplePool(samples=a[None, :] + nu, sigma_prime=sigma_prime, seed=seed)


def pool_eigenvalues(
    pool: PseudosamplePool, l: int, p_tilde: int
) -> PooledEigenvalues:
    """Solve every pseudosample by the pencil estimator (order p_tilde,
    pencil parameter l) and pool the eigenvalues, tagged by source index."""
    points, sources, weights = [], [], []
    for r in range(pool.T):
        sol = gpof(pool.samples[r], l, p_tilde)
        points.append(sol.zeta)
        weights.append(sol.gamma)
        sources.append(np.full(sol.order, r))
    return PooledEigenvalues(
        points=np.concatenate(points),
        sources=np.concatenate(sources),
        weights=np.concatenate(weights),
    )


def gate_by_regions(points, regions: RegionSet):
    """Split points into (retained, discarded) by nearest-cell membership in
    the union of the regions."""
    pts = np.asarray(points, dtype=complex)
    mask = regions.contains(pts)
    return pts[mask], pts[~mask]


def kmeans_cluster(points, k: int, init) -> ClusterSet:
    """Lloyd iteration in the plane with fixed initial centroids.

    Runs until the assignment stabilizes or 100 iterations; empty clusters
    keep their previous centroid and are retained with cardinality 0.  Fully
    deterministic.  ``points`` may carry parallel weights (PooledEigenvalues)
    or be a plain complex array.
    """
    if isinstance(points, PooledEigenvalues):
        pts = points.points
        wts = points.weights
    else:
        pts = np.asarray(points, dtype=complex)
        wts = np.zeros(pts.size, dtype=complex)
    init = np.asarray(init, dtype=complex)
    if init.size == 0:
        raise ValueError("need at least one initial centroid")
    k = min(k, init.size)
    centroids = init[:k].copy()
    if pts.size == 0:
        return ClusterSet(
            clusters=tuple(
                Cluster(
                    centroid=complex(c),
                    members=np.empty(0, complex),
                    member_weights=np.empty(0, complex),
                )
                for c in centroids
            ),
            init_centroids=init[:k],
            discarded_points=np.empty(0, complex),
        )

    xy = np.column_stack([pts.real, pts.imag])
    cxy = np.column_stack([centroids.real, centroids.imag])
    assign = None
    for _ in range(100):
        d2 = ((xy[:, None, :] - cxy[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(k):
            sel = assign == j
            if sel.any():
                cxy[j] = xy[sel].mean(axis=0)

    clusters = []
    for j in range(k):
        sel = assign == j
        clusters.append(
            Cluster(
                centroid=complex(cxy[j, 0], cxy[j, 1]),
                members=pts[sel],
                member_weights=wts[sel],
            )
        )
    return ClusterSet(
        clusters=tuple(clusters),
        init_centroids=init[:k],
        discarded_points=np.empty(0, complex),
    )


def accept_clusters(clusters: ClusterSet, alpha: float, T: int) -> ClusterSet:
    """Flag clusters whose cardinality reaches floor(alpha * T)."""
    if not 0.5 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0.5, 1]")
    threshold = math.floor(alpha * T + 1e-9)
    flagged = tuple(
        replace(c, accepted=c.cardinality >= threshold) for c in clusters.clusters
    )
    return ClusterSet(
        clusters=flagged,
        init_centroids=clusters.init_centroids,
        discarded_points=clusters.discarded_points,
    )


def estimate(a, sigma: float, hp: Hyperparameters, seed: int) -> EstimationReport:
    """Run the full pipeline on n samples with known noise s.d. sigma.

    Steps: condensed density on the first 2*p_tilde samples -> region
    extraction -> T pseudosamples over all n data -> per-sample pencil solves
    (l = n/2, order p_tilde) -> region gating -> k-means from the unperturbed
    solution -> cardinality-based acceptance.  Mode estimates are the accepted
    cluster means; weights are re-fit on the original data by least squares.
    Deterministic for fixed (a, sigma, hp, seed).
    """
    a = np.asarray(a, dtype=complex)
    n = a.size
    if n < 2 * hp.p_tilde:
        raise ValueError(f"need n >= 2*p_tilde = {2 * hp.p_tilde}, have {n}")

    grid = condensed_density(a, hp, sigma)
    regions = extract_regions(grid, hp.tau)
    diagnostics = {
        "seed": int(seed),
        "hyperparameters": asdict(hp),
        "n": int(n),
        "sigma": float(sigma),
        "region_count": regions.p_n,
    }
    if regions.p_n == 0:
        diagnostics["empty_region_set"] = True
        return EstimationReport(
            p_ott=0, xi_hat=(), c_hat=(), spread=(), diagnostics=diagnostics
        )

    pool = gen_pseudosamples(a, hp.sigma_ratio * sigma, hp.T, seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RankCollapseWarning)
        pooled = pool_eigenvalues(pool, n // 2, hp.p_tilde)
        init = gpof(a, n // 2, hp.p_tilde).zeta
    inside = regions.contains(pooled.points)
    retained = pooled.subset(inside)
    discarded = pooled.subset(~inside)
    diagnostics["pooled_points"] = len(pooled)
    diagnostics["discarded_fraction"] = (
        float(len(discarded)) / len(pooled) if len(pooled) else 0.0
    )

    if len(retained) == 0 or init.size == 0:
        diagnostics["no_points_retained"] = True
        return EstimationReport(
            p_ott=0, xi_hat=(), c_hat=(), spread=(), diagnostics=diagnostics
        )

    clusters = kmeans_cluster(retained, hp.p_tilde, init)
    clusters = ClusterSet(
        clusters=clusters.clusters,
        init_centroids=clusters.init_centroids,
        discarded_points=discarded.points,
    )
    clusters = accept_clusters(clusters, hp.alpha, hp.T)
    accepted = clusters.accepted()
    diagnostics["cluster_cardinalities"] = [c.cardinality for c in clusters.clusters]

    p_ott = len(accepted)
    if p_ott == 0:
        diagnostics["no_clusters_accepted"] = True
        return EstimationReport(
            p_ott=0, xi_hat=(), c_hat=(), spread=(), diagnostics=diagnostics
        )

    xi_hat = np.array([c.mean() for c in accepted])
    avg_weights = [
        complex(np.mean(c.member_weights)) if c.cardinality else 0j for c in accepted
    ]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RankCollapseWarning)
        c_hat, residual = weights_ls(a, xi_hat)

    order = np.lexsort((np.angle(xi_hat), -np.abs(xi_hat), -np.abs(c_hat)))
    xi_hat = xi_hat[order]
    c_hat = c_hat[order]
    spreads = [accepted[i].spread() for i in order]
    avg_weights = [avg_weights[i] for i in order]

    diagnostics["residual"] = float(residual)
    diagnostics["cluster_avg_weights"] = [
        {"re": w.real, "im": w.imag} for w in avg_weights
    ]
    return EstimationReport(
        p_ott=p_ott,
        xi_hat=tuple(complex(z) for z in xi_hat),
        c_hat=tuple(complex(z) for z in c_hat),
        spread=tuple(spreads),
        diagnostics=diagnostics,
    )
