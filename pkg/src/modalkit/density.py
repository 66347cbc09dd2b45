"""Condensed density of pencil eigenvalues on a complex-plane lattice.

The location statistics of the interpolation nodes are summarized by a
probability density h(z) over the complex plane.  It is estimated from a
single realization by a closed form: QR-factorize the (Cadzow-filtered)
Hankel data matrix, damp the noise floor of the R factor row-wise, then for
every lattice point z triangularize the column-shifted matrix R(E1 - z*E0)
by Givens rotations and accumulate digamma terms of its squared diagonal.
The discrete Laplacian of that field, clamped to nonnegative values and
normalized, is the density estimate.  Unimodal neighborhoods of its local
maxima are the regions used downstream to gate perturbed eigenvalue clouds.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import digamma

from .model import Hyperparameters
from .pencil import build_data_matrix, cadzow

__all__ = [
    "Lattice",
    "DensityGrid",
    "Region",
    "RegionSet",
    "filter_r_diagonals",
    "shifted_diag",
    "condensed_density",
    "extract_regions",
    "save_grid",
    "save_regions",
]

# Cadzow stop tolerance inside the density pipeline, relative to ||U||_F.
# Calibrated so the iteration terminates within its cap on the benchmark
# signals at every tested noise level (worst observed relative change after
# 10 sweeps is ~7e-3) while still running several sweeps at high SNR.
CADZOW_ETA_REL = 1e-2

# Rank for the structured denoising step keeps singular values above
# _RANK_FACTOR * sigma * sqrt(n_used).  The factor is calibrated on the
# benchmark signals: 1.0 over-truncates and fuses neighboring density bumps,
# 0.55 keeps the bump structure that the downstream clustering relies on.
_RANK_FACTOR = 0.55

# Lattice resolution the density threshold tau is calibrated at.
_TAU_REFERENCE_DIM = 80


@dataclass(frozen=True)
class Lattice:
    """Square lattice on [lo, hi]^2 with dim points per axis (endpoints
    included)."""

    bounds: tuple = (-1.3, 1.3)
    dim: int = 80

    def __post_init__(self):
        lo, hi = self.bounds
        if not lo < hi:
            raise ValueError("bounds must be an increasing pair")
        if self.dim < 3:
            raise ValueError("lattice needs at least 3 points per axis")

    @property
    def spacing(self) -> float:
        lo, hi = self.bounds
        return (hi - lo) / (self.dim - 1)

    @property
    def cell_area(self) -> float:
        return self.spacing**2

    def axis(self) -> np.ndarray:
        lo, hi = self.bounds
        return lo + self.spacing * np.arange(self.dim)

    def points(self) -> np.ndarray:
        """dim x dim complex lattice points; [i, j] = x_i + 1j*y_j."""
        ax = self.axis()
        return ax[:, None] + 1j * ax[None, :]

    def cell_index(self, z: complex):
        """Nearest cell (i, j), or None when z rounds outside the lattice."""
        lo, _ = self.bounds
        i = round((z.real - lo) / self.spacing)
        j = round((z.imag - lo) / self.spacing)
        if 0 <= i < self.dim and 0 <= j < self.dim:
            return (i, j)
        return None


@dataclass(frozen=True)
class DensityGrid:
    """Nonnegative lattice density normalized so sum(values) * cell_area = 1."""

    lattice: Lattice
    values: np.ndarray
    beta: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.shape != (self.lattice.dim, self.lattice.dim):
            raise ValueError("values must be dim x dim")

    def mass(self) -> float:
        return float(self.values.sum() * self.lattice.cell_area)

    def peak_point(self) -> complex:
        i, j = np.unravel_index(np.argmax(self.values), self.values.shape)
        ax = self.lattice.axis()
        return complex(ax[i], ax[j])

    def scaled(self) -> np.ndarray:
        """Per-cell probability mass at the reference lattice resolution.

        The region threshold tau is calibrated against per-cell mass on the
        default 80-point lattice; mass * (dim/80)**2 keeps the comparison
        resolution-independent (a smooth bump's per-cell mass shrinks like
        1/dim**2).
        """
        ref = (self.lattice.dim / _TAU_REFERENCE_DIM) ** 2
        return self.values * self.lattice.cell_area * ref


@dataclass(frozen=True)
class Region:
    """A unimodal neighborhood of a density local maximum."""

    cells: frozenset
    peak_cell: tuple
    peak_value: float
    peak_point: complex


@dataclass(frozen=True)
class RegionSet:
    lattice: Lattice
    regions: tuple

    @property
    def p_n(self) -> int:
        return len(self.regions)

    def membership_mask(self) -> np.ndarray:
        mask = np.zeros((self.lattice.dim, self.lattice.dim), dtype=bool)
        for reg in self.regions:
            for i, j in reg.cells:
                mask[i, j] = True
        return mask

    def contains(self, points) -> np.ndarray:
        """Boolean mask: nearest lattice cell of each point lies in some
        region."""
        pts = np.atleast_1d(np.asarray(points, dtype=complex))
        mask = self.membership_mask()
        out = np.zeros(pts.shape, dtype=bool)
        for k, z in enumerate(pts):
            idx = self.lattice.cell_index(z)
            out[k] = idx is not None and mask[idx]
        return out


def filter_r_diagonals(R: np.ndarray, gamma: float) -> np.ndarray:
    """Damp the noise floor of an upper-trapezoidal factor: divide row h
    (1-based) by h**gamma, which rescales every stored diagonal entry
    R[h, h+l] while leaving the zero subdiagonal part untouched."""
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    R = np.asarray(R, dtype=complex)
    scale = np.arange(1, R.shape[0] + 1, dtype=float) ** gamma
    return R / scale[:, None]


def _givens_sweep(H: np.ndarray) -> np.ndarray:
    """Triangularize a batch of upper-Hessenberg matrices in place and return
    the absolute diagonals.

    H has shape (nz, m, w) with m >= w; each H[k] is upper Hessenberg.
    """
    nz, m, w = H.shape
    for k in range(min(m - 1, w)):
        f = H[:, k, k].copy()
        g = H[:, k + 1, k].copy()
        r = np.sqrt(np.abs(f) ** 2 + np.abs(g) ** 2)
        safe = r > 0.0
        rs = np.where(safe, r, 1.0)
        c = np.where(safe, f.conj() / rs, 1.0)
        s = np.where(safe, g.conj() / rs, 0.0)
        top = H[:, k, k:]
        bot = H[:, k + 1, k:]
        new_top = c[:, None] * top + s[:, None] * bot
        new_bot = -s.conj()[:, None] * top + c.conj()[:, None] * bot
        H[:, k, k:] = new_top
        H[:, k + 1, k:] = new_bot
    kk = np.arange(w)
    return np.abs(H[:, kk, kk])


def _shifted_diag_batch(R: np.ndarray, zs: np.ndarray) -> np.ndarray:
    """|diag| of the triangularized R(E1 - z*E0) for every z in zs.

    Returns an array of shape (len(zs), cols-1).
    """
    R = np.asarray(R, dtype=complex)
    zs = np.asarray(zs, dtype=complex).ravel()
    H = R[None, :, 1:] - zs[:, None, None] * R[None, :, :-1]
    return _givens_sweep(H)


def shifted_diag(R: np.ndarray, z: complex) -> np.ndarray:
    """Absolute diagonal of the Givens-triangularized column-shift difference.

    The product R(E1 - z*E0) (column j equals R[:, j+1] - z*R[:, j]) of an
    upper-trapezoidal R is upper Hessenberg; rotations preserve
    prod_k |diag_k| = |det| on square inputs.
    """
    R = np.asarray(R, dtype=complex)
    if R.ndim != 2 or R.shape[1] < 2:
        raise ValueError("R needs at least 2 columns")
    return _shifted_diag_batch(R, np.array([z]))[0]


def _discrete_laplacian(F: np.ndarray, h: float) -> np.ndarray:
    """Five-point Laplacian; second differences are shifted inward (one-sided)
    at the lattice borders."""

    def second_diff(A, axis):
        d = np.empty_like(A)
        inner = np.diff(A, 2, axis=axis)
        sl = [slice(None)] * A.ndim
        sl[axis] = slice(1, -1)
        d[tuple(sl)] = inner
        first = [slice(None)] * A.ndim
        first[axis] = 0
        last = [slice(None)] * A.ndim
        last[axis] = -1
        d[tuple(first)] = np.take(inner, 0, axis=axis)
        d[tuple(last)] = np.take(inner, -1, axis=axis)
        return d

    return (second_diff(F, 0) + second_diff(F, 1)) / h**2


def condensed_density(a, hp: Hyperparameters, sigma: float) -> DensityGrid:
    """Estimate the eigenvalue location density from the first 2*p_tilde
    samples.

    Pipeline: build the square-pencil data matrix, Cadzow-filter it at the
    noise-level rank, QR-factorize, damp the R diagonals, then accumulate
    sum_k digamma((|R_kk(z)|**2 / (sigma**2 * beta) + 1) / 2) over the lattice
    with beta = beta_factor * 2 * p_tilde.  The discrete Laplacian of that
    field, clamped to >= 0, is normalized into a probability density.
    """
    a = np.asarray(a, dtype=complex)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    n_used = 2 * hp.p_tilde
    if n_used > a.size:
        raise ValueError(
            f"need at least 2*p_tilde = {n_used} samples, have {a.size}"
        )
    U = build_data_matrix(a[:n_used], hp.p_tilde)

    s = np.linalg.svd(U.matrix, compute_uv=False)
    rank = int(np.count_nonzero(s > _RANK_FACTOR * sigma * math.sqrt(n_used)))
    rank = min(max(rank, 1), min(U.rows, U.cols))
    eta = CADZOW_ETA_REL * float(np.linalg.norm(U.matrix))
    filtered = cadzow(U, rank, max_iter=hp.cadzow_iters, eta=eta).matrix.matrix

    _, R = np.linalg.qr(filtered, mode="reduced")
    d = np.diagonal(R).copy()
    phase = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1.0), 1.0)
    R = R / phase[:, None]
    R = filter_r_diagonals(R, hp.gamma)

    lattice = Lattice(bounds=tuple(hp.lattice_bounds), dim=hp.lattice_dim)
    zs = lattice.points().ravel()
    beta = hp.beta_factor * n_used
    field = np.empty(zs.size, dtype=float)
    chunk = 2048
    for start in range(0, zs.size, chunk):
        mags = _shifted_diag_batch(R, zs[start : start + chunk])
        field[start : start + chunk] = digamma(
            0.5 * (mags**2 / (sigma**2 * beta) + 1.0)
        ).sum(axis=1)
    field = field.reshape(lattice.dim, lattice.dim)

    lap = _discrete_laplacian(field, lattice.spacing)
    values = np.clip(lap, 0.0, None)
    total = values.sum() * lattice.cell_area
    if total <= 0:
        raise ValueError("degenerate density: no positive curvature on lattice")
    values /= total
    return DensityGrid(lattice=lattice, values=values, beta=beta)


def _local_maxima(values: np.ndarray) -> list[tuple[int, int]]:
    dim_i, dim_j = values.shape
    out = []
    for i in range(dim_i):
        for j in range(dim_j):
            v = values[i, j]
            neighbors = []
            if i > 0:
                neighbors.append(values[i - 1, j])
            if i < dim_i - 1:
                neighbors.append(values[i + 1, j])
            if j > 0:
                neighbors.append(values[i, j - 1])
            if j < dim_j - 1:
                neighbors.append(values[i, j + 1])
            if all(v > w for w in neighbors):
                out.append((i, j))
    return out


def _ascent_labels(values: np.ndarray) -> np.ndarray:
    """Steepest-ascent watershed: flat index of the terminal local maximum of
    every cell's (deterministic) hill-climbing path; -1 on plateaus."""
    dim_i, dim_j = values.shape
    labels = np.full(values.size, -1, dtype=np.int64)
    order = (-1, 0), (1, 0), (0, -1), (0, 1)

    def flat(i, j):
        return i * dim_j + j

    for i0 in range(dim_i):
        for j0 in range(dim_j):
            start = flat(i0, j0)
            if labels[start] != -1:
                continue
            path = []
            i, j = i0, j0
            while True:
                idx = flat(i, j)
                if labels[idx] != -1:
                    terminal = labels[idx]
                    break
                path.append(idx)
                best = values[i, j]
                step = None
                for di, dj in order:
                    ni, nj = i + di, j + dj
                    if 0 <= ni < dim_i and 0 <= nj < dim_j:
                        if values[ni, nj] > best:
                            best = values[ni, nj]
                            step = (ni, nj)
                if step is None:
                    terminal = idx
                    break
                i, j = step
            for idx in path:
                labels[idx] = terminal
    return labels.reshape(values.shape)


# Region growth stops at this fraction of the selection threshold tau; below
# it the density is treated as the near-zero gap separating the regions.
_REGION_FLOOR_FRACTION = 0.1

# Maxima at most this many cells apart (Chebyshev) are one unresolved mode of
# the density and share a region.
_PEAK_MERGE_CELLS = 2


def extract_regions(grid: DensityGrid, tau: float) -> RegionSet:
    """Regions of the density around its significant local maxima.

    A local maximum qualifies when its scaled value reaches tau.  Its region
    is the steepest-ascent basin of the maximum, cut at a low contour
    (tau * 0.1) so the near-zero gap between modes bounds every region;
    maxima within 2 lattice cells of each other are unresolved at the lattice
    spacing and share one region.  Regions are pairwise disjoint and each is
    connected.  An empty region set is a valid result.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    values = grid.values
    scaled = grid.scaled()
    peaks = [p for p in _local_maxima(values) if scaled[p] >= tau]
    peaks.sort(key=lambda p: (-values[p], p))
    if not peaks:
        return RegionSet(lattice=grid.lattice, regions=())

    # group twin maxima (union-find over close pairs)
    parent = list(range(len(peaks)))

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    for a in range(len(peaks)):
        for b in range(a + 1, len(peaks)):
            da = abs(peaks[a][0] - peaks[b][0])
            db = abs(peaks[a][1] - peaks[b][1])
            if max(da, db) <= _PEAK_MERGE_CELLS:
                parent[find(b)] = find(a)

    labels = _ascent_labels(values)
    dim_j = grid.lattice.dim
    peak_flat = {p[0] * dim_j + p[1]: find(k) for k, p in enumerate(peaks)}
    floor = tau * _REGION_FLOOR_FRACTION

    group_cells: dict[int, set] = {}
    it = np.nditer(labels, flags=["multi_index"])
    for lab in it:
        g = peak_flat.get(int(lab))
        if g is not None and scaled[it.multi_index] >= floor:
            group_cells.setdefault(g, set()).add(it.multi_index)

    regions = []
    ax = grid.lattice.axis()
    for g, cells in group_cells.items():
        peak = peaks[g]
        regions.append(
            Region(
                cells=frozenset(cells),
                peak_cell=peak,
                peak_value=float(values[peak]),
                peak_point=complex(ax[peak[0]], ax[peak[1]]),
            )
        )
    regions.sort(key=lambda r: (-r.peak_value, r.peak_cell))
    return RegionSet(lattice=grid.lattice, regions=tuple(regions))


# ---------------------------------------------------------------------------
# File exports

_FMT = "%.17g"


def save_grid(grid: DensityGrid, path) -> None:
    """Write the density as CSV rows x,y,h."""
    ax = grid.lattice.axis()
    lines = ["x,y,h"]
    for i in range(grid.lattice.dim):
        for j in range(grid.lattice.dim):
            lines.append(
                f"{_FMT % ax[i]},{_FMT % ax[j]},{_FMT % grid.values[i, j]}"
            )
    Path(path).write_text("\n".join(lines) + "\n")


def save_regions(regions: RegionSet, path) -> None:
    doc = {
        "regions": [
            {
                "peak": {"x": r.peak_point.real, "y": r.peak_point.imag},
                "value": r.peak_value,
                "cells": sorted([list(c) for c in r.cells]),
            }
            for r in regions.regions
        ]
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")
